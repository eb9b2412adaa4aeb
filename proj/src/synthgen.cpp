// src/synthgen.cpp

// Copyright 2026  adapt-asr authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "adaptasr/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "json.hpp"

namespace adaptasr::synthgen {

namespace {
using nlohmann::json;
}

// ---------------------------------------------------------------------------
// CorpusSpec

namespace {

void fill_default_priors(CorpusSpec& spec, double own_half_mass) {
  const int half = spec.vocab_size / 2;
  spec.source_prior.assign(static_cast<size_t>(spec.vocab_size), 0.0);
  spec.target_prior.assign(static_cast<size_t>(spec.vocab_size), 0.0);
  for (int k = 0; k < spec.vocab_size; ++k) {
    const bool first_half = k < half;
    const double src_mass = first_half ? own_half_mass : 1.0 - own_half_mass;
    const int half_size = first_half ? half : spec.vocab_size - half;
    spec.source_prior[static_cast<size_t>(k)] =
        src_mass / static_cast<double>(half_size);
    spec.target_prior[static_cast<size_t>(k)] =
        (1.0 - src_mass) / static_cast<double>(half_size);
  }
}

}  // namespace

CorpusSpec CorpusSpec::with_default_priors(double own_half_mass) {
  CorpusSpec spec;
  fill_default_priors(spec, own_half_mass);
  return spec;
}

double total_variation(const std::vector<double>& p, const std::vector<double>& q) {
  require(p.size() == q.size(), "total_variation: size mismatch");
  double tv = 0.0;
  for (size_t i = 0; i < p.size(); ++i) tv += std::abs(p[i] - q[i]);
  return 0.5 * tv;
}

void CorpusSpec::validate() const {
  if (vocab_size < 4) throw ConfigError("corpus spec: vocab_size must be >= 4");
  if (feat_dim < 1) throw ConfigError("corpus spec: feat_dim must be >= 1");
  auto check_range = [](const char* name, const LenRange& r) {
    if (r.min_frames < 1 || r.max_frames < r.min_frames) {
      throw ConfigError(cat("corpus spec: empty length range for ", name));
    }
  };
  check_range("source", source_len_range);
  check_range("target", target_len_range);
  auto check_prior = [this](const char* name, const std::vector<double>& p) {
    if (static_cast<int>(p.size()) != vocab_size) {
      throw ConfigError(cat("corpus spec: ", name, " prior has ", p.size(),
                            " entries, vocab is ", vocab_size));
    }
    double total = 0.0;
    for (double w : p) {
      if (w < 0.0) throw ConfigError(cat("corpus spec: negative mass in ", name));
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-6) {
      throw ConfigError(cat("corpus spec: ", name, " prior sums to ", total));
    }
  };
  check_prior("source", source_prior);
  check_prior("target", target_prior);
  const double tv = total_variation(source_prior, target_prior);
  if (tv < 0.3) {
    throw ConfigError(cat("corpus spec: domain priors too similar, TV = ", tv,
                          " (need >= 0.3)"));
  }
  if (noise_sigma < 0.0) throw ConfigError("corpus spec: negative noise_sigma");
  if (n_source < 0 || n_target < 0 || n_eval_source < 0 || n_eval_target < 0) {
    throw ConfigError("corpus spec: negative utterance count");
  }
  if (stack < 1 || subsample < 1) throw ConfigError("corpus spec: bad stacking");
  if (domain_onehot_size < 2) {
    throw ConfigError("corpus spec: domain_onehot_size must be >= 2");
  }
  if (target_label_fraction < 0.0 || target_label_fraction > 1.0) {
    throw ConfigError("corpus spec: target_label_fraction out of [0,1]");
  }
  // The mean-length ratio mirrors the medium-form vs short-form shift.
  const double mean_src =
      0.5 * (source_len_range.min_frames + source_len_range.max_frames);
  const double mean_tgt =
      0.5 * (target_len_range.min_frames + target_len_range.max_frames);
  if (mean_tgt < 2.0 * mean_src) {
    throw ConfigError(cat("corpus spec: target mean length ", mean_tgt,
                          " must be >= 2x source mean length ", mean_src));
  }
}

std::string CorpusSpec::to_json() const {
  json j;
  j["vocab_size"] = vocab_size;
  j["feat_dim"] = feat_dim;
  j["source_len_range"] = {source_len_range.min_frames, source_len_range.max_frames};
  j["target_len_range"] = {target_len_range.min_frames, target_len_range.max_frames};
  j["source_prior"] = source_prior;
  j["target_prior"] = target_prior;
  j["noise_sigma"] = noise_sigma;
  j["n_source"] = n_source;
  j["n_target"] = n_target;
  j["n_eval_source"] = n_eval_source;
  j["n_eval_target"] = n_eval_target;
  j["stack"] = stack;
  j["subsample"] = subsample;
  j["domain_onehot_size"] = domain_onehot_size;
  j["target_label_fraction"] = target_label_fraction;
  j["seed"] = seed;
  return j.dump(2);
}

CorpusSpec CorpusSpec::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(cat("corpus spec: invalid JSON: ", e.what()));
  }
  CorpusSpec spec;
  try {
    if (j.contains("vocab_size")) spec.vocab_size = j["vocab_size"].get<int>();
    fill_default_priors(spec, 0.9);
    if (j.contains("feat_dim")) spec.feat_dim = j["feat_dim"].get<int>();
    if (j.contains("source_len_range")) {
      spec.source_len_range = {j["source_len_range"][0].get<int>(),
                               j["source_len_range"][1].get<int>()};
    }
    if (j.contains("target_len_range")) {
      spec.target_len_range = {j["target_len_range"][0].get<int>(),
                               j["target_len_range"][1].get<int>()};
    }
    if (j.contains("source_prior")) {
      spec.source_prior = j["source_prior"].get<std::vector<double>>();
    }
    if (j.contains("target_prior")) {
      spec.target_prior = j["target_prior"].get<std::vector<double>>();
    }
    if (j.contains("noise_sigma")) spec.noise_sigma = j["noise_sigma"].get<double>();
    if (j.contains("n_source")) spec.n_source = j["n_source"].get<int>();
    if (j.contains("n_target")) spec.n_target = j["n_target"].get<int>();
    if (j.contains("n_eval_source")) spec.n_eval_source = j["n_eval_source"].get<int>();
    if (j.contains("n_eval_target")) spec.n_eval_target = j["n_eval_target"].get<int>();
    if (j.contains("stack")) spec.stack = j["stack"].get<int>();
    if (j.contains("subsample")) spec.subsample = j["subsample"].get<int>();
    if (j.contains("domain_onehot_size")) {
      spec.domain_onehot_size = j["domain_onehot_size"].get<int>();
    }
    if (j.contains("target_label_fraction")) {
      spec.target_label_fraction = j["target_label_fraction"].get<double>();
    }
    if (j.contains("seed")) spec.seed = j["seed"].get<uint64_t>();
  } catch (const json::exception& e) {
    throw ParseError(cat("corpus spec: bad field: ", e.what()));
  }
  return spec;
}

// ---------------------------------------------------------------------------
// Splits

std::vector<int64_t> sample_fraction(const std::vector<int64_t>& ids,
                                     double fraction, uint64_t seed) {
  require(fraction >= 0.0 && fraction <= 1.0, "sample_fraction: bad fraction");
  const auto want = static_cast<size_t>(
      std::llround(fraction * static_cast<double>(ids.size())));
  std::vector<int64_t> pool = ids;
  Rng rng(seed);
  rng.shuffle(pool);
  pool.resize(want);
  std::sort(pool.begin(), pool.end());
  return pool;
}

// ---------------------------------------------------------------------------
// Frame stacking

Tensor stack_frames(const Tensor& features, int stack, int subsample) {
  require(features.rank() == 2,
          cat("stack_frames: expects [T x F], got ", shape_str(features.shape())));
  const int64_t T = features.dim(0);
  const int64_t F = features.dim(1);
  require(T >= 1, "stack_frames: empty input (T < 1)");
  require(stack >= 1 && subsample >= 1, "stack_frames: bad parameters");
  const int64_t T_out = (T + subsample - 1) / subsample;
  const auto& in = features.values();
  std::vector<double> out(static_cast<size_t>(T_out * stack * F), 0.0);
  for (int64_t i = 0; i < T_out; ++i) {
    for (int64_t s = 0; s < stack; ++s) {
      const int64_t src = i * subsample + s;
      if (src >= T) break;  // zero-pad at the tail
      std::copy_n(&in[static_cast<size_t>(src * F)], F,
                  &out[static_cast<size_t>((i * stack + s) * F)]);
    }
  }
  return Tensor::from_vector({T_out, static_cast<int64_t>(stack) * F}, std::move(out));
}

// ---------------------------------------------------------------------------
// Generation

namespace {

struct TokenPrototypes {
  // Per-token fixed prototype frame and duration; durations are fixed per
  // token so that noise_sigma == 0 renders identical token sequences to
  // identical feature matrices.
  std::vector<std::vector<double>> frames;  // vocab x feat_dim
  std::vector<int> durations;               // in [3, 6]
};

TokenPrototypes make_prototypes(const CorpusSpec& spec, Rng& rng) {
  TokenPrototypes proto;
  proto.frames.resize(static_cast<size_t>(spec.vocab_size));
  proto.durations.resize(static_cast<size_t>(spec.vocab_size));
  for (int k = 0; k < spec.vocab_size; ++k) {
    auto& f = proto.frames[static_cast<size_t>(k)];
    f.resize(static_cast<size_t>(spec.feat_dim));
    for (double& x : f) x = rng.normal(0.0, 1.0);
    proto.durations[static_cast<size_t>(k)] = static_cast<int>(rng.range(3, 6));
  }
  return proto;
}

Utterance render_utterance(const CorpusSpec& spec, const TokenPrototypes& proto,
                           int domain, Rng rng) {
  const auto& prior =
      domain == kSourceDomain ? spec.source_prior : spec.target_prior;
  const LenRange& range =
      domain == kSourceDomain ? spec.source_len_range : spec.target_len_range;
  const int64_t frames_wanted = rng.range(range.min_frames, range.max_frames);

  Utterance utt;
  utt.domain_index = domain;
  utt.domain_onehot_size = spec.domain_onehot_size;
  int64_t frames = 0;
  while (frames < frames_wanted) {
    const int tok = static_cast<int>(rng.categorical(prior));
    utt.tokens.push_back(tok);
    frames += proto.durations[static_cast<size_t>(tok)];
  }

  std::vector<double> raw(static_cast<size_t>(frames * spec.feat_dim));
  int64_t t = 0;
  for (int tok : utt.tokens) {
    const auto& f = proto.frames[static_cast<size_t>(tok)];
    for (int d = 0; d < proto.durations[static_cast<size_t>(tok)]; ++d) {
      for (int c = 0; c < spec.feat_dim; ++c) {
        double v = f[static_cast<size_t>(c)];
        if (spec.noise_sigma > 0.0) v += rng.normal(0.0, spec.noise_sigma);
        raw[static_cast<size_t>(t * spec.feat_dim + c)] = v;
      }
      ++t;
    }
  }

  Tensor stacked = stack_frames(
      Tensor::from_vector({frames, spec.feat_dim}, std::move(raw)), spec.stack,
      spec.subsample);

  // Append the domain one-hot to every stacked frame.
  const int64_t T = stacked.dim(0);
  const int64_t W = stacked.dim(1);
  const int64_t D = spec.domain_onehot_size;
  std::vector<double> full(static_cast<size_t>(T * (W + D)), 0.0);
  const auto& sv = stacked.values();
  for (int64_t r = 0; r < T; ++r) {
    std::copy_n(&sv[static_cast<size_t>(r * W)], W,
                &full[static_cast<size_t>(r * (W + D))]);
    full[static_cast<size_t>(r * (W + D) + W + domain)] = 1.0;
  }
  utt.features = Tensor::from_vector({T, W + D}, std::move(full));
  return utt;
}

// Logistic-regression probe on mean acoustic features (domain one-hot
// excluded) plus a length feature; generation fails if the domains are not
// linearly separable above 90% accuracy.
double probe_domain_accuracy(const Corpus& corpus) {
  const int W = corpus.spec.stacked_width();
  std::vector<std::vector<double>> xs;
  std::vector<double> ys;
  std::vector<int64_t> train_ids = corpus.manifest.md;
  for (int64_t id : train_ids) {
    const Utterance& u = corpus.utterances[static_cast<size_t>(id)];
    std::vector<double> x(static_cast<size_t>(W) + 1, 0.0);
    const int64_t T = u.features.dim(0);
    const int64_t cols = u.features.dim(1);
    const auto& fv = u.features.values();
    for (int64_t t = 0; t < T; ++t) {
      for (int64_t c = 0; c < W; ++c) {
        x[static_cast<size_t>(c)] += fv[static_cast<size_t>(t * cols + c)];
      }
    }
    for (int64_t c = 0; c < W; ++c) x[static_cast<size_t>(c)] /= static_cast<double>(T);
    x[static_cast<size_t>(W)] = std::log(static_cast<double>(T));
    xs.push_back(std::move(x));
    ys.push_back(u.domain_index == kTargetDomain ? 1.0 : 0.0);
  }
  if (xs.empty()) return 1.0;

  const size_t dim = xs[0].size();
  std::vector<double> w(dim, 0.0);
  double b = 0.0;
  const double lr = 0.5;
  for (int iter = 0; iter < 300; ++iter) {
    std::vector<double> gw(dim, 0.0);
    double gb = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
      double z = b;
      for (size_t d = 0; d < dim; ++d) z += w[d] * xs[i][d];
      const double p = 1.0 / (1.0 + std::exp(-z));
      const double err = p - ys[i];
      for (size_t d = 0; d < dim; ++d) gw[d] += err * xs[i][d];
      gb += err;
    }
    const double inv = 1.0 / static_cast<double>(xs.size());
    for (size_t d = 0; d < dim; ++d) w[d] -= lr * gw[d] * inv;
    b -= lr * gb * inv;
  }
  int correct = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    double z = b;
    for (size_t d = 0; d < dim; ++d) z += w[d] * xs[i][d];
    const double p = 1.0 / (1.0 + std::exp(-z));
    if ((p >= 0.5) == (ys[i] >= 0.5)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(xs.size());
}

}  // namespace

Corpus generate(const CorpusSpec& spec) {
  spec.validate();
  Corpus corpus;
  corpus.spec = spec;

  Rng master(spec.seed);
  Rng proto_rng = master.derive(0xA0);
  const TokenPrototypes proto = make_prototypes(spec, proto_rng);

  // Utterance ids: train source, train target, eval source, eval target.
  auto emit = [&](int domain, int count, uint64_t stream, std::vector<int64_t>& ids) {
    for (int i = 0; i < count; ++i) {
      const auto id = static_cast<int64_t>(corpus.utterances.size());
      Rng utt_rng = master.derive(stream).derive(static_cast<uint64_t>(i));
      corpus.utterances.push_back(render_utterance(spec, proto, domain, utt_rng));
      ids.push_back(id);
    }
  };
  SplitManifest& m = corpus.manifest;
  emit(kSourceDomain, spec.n_source, 0xB0, m.md_src);
  emit(kTargetDomain, spec.n_target, 0xB1, m.mf_unlabeled);
  emit(kSourceDomain, spec.n_eval_source, 0xB2, m.eval_sf);
  emit(kTargetDomain, spec.n_eval_target, 0xB3, m.eval_mf);

  m.md = m.md_src;
  m.md.insert(m.md.end(), m.mf_unlabeled.begin(), m.mf_unlabeled.end());
  const std::vector<int64_t> labeled_target = sample_fraction(
      m.mf_unlabeled, spec.target_label_fraction, spec.seed ^ 0x3B9ACA07ULL);
  m.md_3p = m.md_src;
  m.md_3p.insert(m.md_3p.end(), labeled_target.begin(), labeled_target.end());

  require(total_variation(spec.source_prior, spec.target_prior) >= 0.3,
          "generate: prior TV distance below 0.3");

  if (spec.n_source > 0 && spec.n_target > 0) {
    const double acc = probe_domain_accuracy(corpus);
    if (acc < 0.9) {
      throw Error(cat("generate: domain probe accuracy ", acc,
                      " below 0.9; the configured shift is too weak"));
    }
  }
  return corpus;
}

// ---------------------------------------------------------------------------
// Corpus file format

namespace {

constexpr char kCorpusMagic[4] = {'A', 'D', 'S', 'R'};
constexpr uint32_t kCorpusVersion = 1;

template <typename T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T read_pod(std::istream& is, const char* what) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!is) throw ParseError(cat("corpus: truncated reading ", what));
  return v;
}

std::string read_text_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(cat("cannot open: ", path));
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

std::string SplitManifest::to_json() const {
  json j;
  j["MD"] = md;
  j["MD_src"] = md_src;
  j["MD_3p"] = md_3p;
  j["MF_unlabeled"] = mf_unlabeled;
  j["eval_MF"] = eval_mf;
  j["eval_SF"] = eval_sf;
  return j.dump(2);
}

SplitManifest SplitManifest::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(cat("manifest: invalid JSON: ", e.what()));
  }
  SplitManifest m;
  try {
    m.md = j.at("MD").get<std::vector<int64_t>>();
    m.md_src = j.at("MD_src").get<std::vector<int64_t>>();
    m.md_3p = j.at("MD_3p").get<std::vector<int64_t>>();
    m.mf_unlabeled = j.at("MF_unlabeled").get<std::vector<int64_t>>();
    m.eval_mf = j.at("eval_MF").get<std::vector<int64_t>>();
    m.eval_sf = j.at("eval_SF").get<std::vector<int64_t>>();
  } catch (const json::exception& e) {
    throw ParseError(cat("manifest: missing field: ", e.what()));
  }
  return m;
}

void write_corpus(const Corpus& corpus, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::string bin_path = dir + "/corpus.bin";
  std::ofstream os(bin_path, std::ios::binary);
  if (!os) throw Error(cat("corpus: cannot open for write: ", bin_path));
  os.write(kCorpusMagic, 4);
  write_pod<uint32_t>(os, kCorpusVersion);
  write_pod<uint32_t>(os, static_cast<uint32_t>(corpus.utterances.size()));
  write_pod<uint32_t>(os, static_cast<uint32_t>(corpus.spec.vocab_size));
  write_pod<uint32_t>(os, static_cast<uint32_t>(corpus.spec.input_width()));
  write_pod<uint32_t>(os, static_cast<uint32_t>(corpus.spec.domain_onehot_size));
  for (const Utterance& u : corpus.utterances) {
    write_pod<uint8_t>(os, static_cast<uint8_t>(u.domain_index));
    write_pod<uint32_t>(os, static_cast<uint32_t>(u.features.dim(0)));
    write_pod<uint32_t>(os, static_cast<uint32_t>(u.features.dim(1)));
    write_pod<uint16_t>(os, static_cast<uint16_t>(u.tokens.size()));
    for (int tok : u.tokens) write_pod<uint16_t>(os, static_cast<uint16_t>(tok));
    os.write(reinterpret_cast<const char*>(u.features.values().data()),
             static_cast<std::streamsize>(u.features.values().size() * sizeof(double)));
  }
  if (!os) throw Error(cat("corpus: write failed: ", bin_path));
  os.close();

  std::ofstream mf(dir + "/manifest.json");
  mf << corpus.manifest.to_json() << "\n";
  std::ofstream sf(dir + "/spec.json");
  sf << corpus.spec.to_json() << "\n";
}

Corpus read_corpus(const std::string& dir) {
  Corpus corpus;
  corpus.spec = CorpusSpec::from_json(read_text_file(dir + "/spec.json"));
  corpus.manifest = SplitManifest::from_json(read_text_file(dir + "/manifest.json"));

  const std::string bin_path = dir + "/corpus.bin";
  std::ifstream is(bin_path, std::ios::binary);
  if (!is) throw Error(cat("corpus: cannot open: ", bin_path));
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kCorpusMagic, 4) != 0) {
    throw ParseError(cat("corpus: bad magic in ", bin_path));
  }
  const auto version = read_pod<uint32_t>(is, "version");
  if (version != kCorpusVersion) {
    throw ParseError(cat("corpus: unsupported version ", version));
  }
  const auto count = read_pod<uint32_t>(is, "record count");
  const auto vocab = read_pod<uint32_t>(is, "vocab size");
  const auto width = read_pod<uint32_t>(is, "feature width");
  const auto onehot = read_pod<uint32_t>(is, "domain one-hot size");
  if (vocab != static_cast<uint32_t>(corpus.spec.vocab_size) ||
      width != static_cast<uint32_t>(corpus.spec.input_width()) ||
      onehot != static_cast<uint32_t>(corpus.spec.domain_onehot_size)) {
    throw ParseError("corpus: header disagrees with spec.json");
  }
  corpus.utterances.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    Utterance u;
    u.domain_index = read_pod<uint8_t>(is, "domain id");
    const auto T = read_pod<uint32_t>(is, "frame count");
    const auto F = read_pod<uint32_t>(is, "feature width");
    if (T < 1 || F != width) {
      throw ParseError(cat("corpus: bad record header at utterance ", i));
    }
    const auto n_tokens = read_pod<uint16_t>(is, "token count");
    u.tokens.resize(n_tokens);
    for (uint16_t t = 0; t < n_tokens; ++t) {
      const auto tok = read_pod<uint16_t>(is, "token");
      if (tok >= vocab) throw ParseError(cat("corpus: token ", tok, " out of vocab"));
      u.tokens[t] = tok;
    }
    std::vector<double> data(static_cast<size_t>(T) * F);
    is.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (!is) throw ParseError(cat("corpus: truncated features at utterance ", i));
    u.features = Tensor::from_vector({static_cast<int64_t>(T), static_cast<int64_t>(F)},
                                     std::move(data));
    u.domain_onehot_size = static_cast<int>(onehot);
    u.label_kind = LabelKind::kHuman;
    corpus.utterances.push_back(std::move(u));
  }
  return corpus;
}

}  // namespace adaptasr::synthgen
