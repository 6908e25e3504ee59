#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "hatebench/corpus.hpp"
#include "hatebench/error.hpp"
#include "hatebench/pipeline.hpp"
#include "json.hpp"

// Binary model container:
//   "HBMF" | u32 version | u64 header length | header JSON
//   u32 array count | per array: u32 name length, name, u32 rank, u64 dims[rank], f64 values
//   "HBEND" | u64 FNV-1a of every preceding byte
// Integers and doubles are little-endian.

namespace hatebench {

static_assert(std::endian::native == std::endian::little, "model files assume a little-endian host");

inline constexpr std::uint32_t kModelFileVersion = 1;

struct NamedArray {
  std::vector<std::uint64_t> shape;
  std::vector<double> values;
};

struct ModelFile {
  std::uint32_t version = kModelFileVersion;
  nlohmann::json header;
  std::map<std::string, NamedArray> arrays;
};

namespace detail {

template <class Int>
void put_int(std::string& out, Int v) {
  char buf[sizeof(Int)];
  std::memcpy(buf, &v, sizeof(Int));
  out.append(buf, sizeof(Int));
}

class ByteReader {
 public:
  explicit ByteReader(std::string_view data) : data_(data) {}

  template <class Int>
  Int get_int() {
    Int v;
    std::memcpy(&v, take(sizeof(Int)).data(), sizeof(Int));
    return v;
  }

  std::string_view take(std::size_t n) {
    if (n > data_.size() - pos_) throw Error(ErrorCode::VersionOrCorruption, "model file truncated");
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t pos() const { return pos_; }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string serialize_model_file(const ModelFile& mf) {
  std::string out = "HBMF";
  detail::put_int<std::uint32_t>(out, mf.version);
  const std::string header = mf.header.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
  detail::put_int<std::uint64_t>(out, header.size());
  out += header;
  detail::put_int<std::uint32_t>(out, static_cast<std::uint32_t>(mf.arrays.size()));
  for (const auto& [name, arr] : mf.arrays) {
    detail::put_int<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    detail::put_int<std::uint32_t>(out, static_cast<std::uint32_t>(arr.shape.size()));
    for (auto d : arr.shape) detail::put_int<std::uint64_t>(out, d);
    const std::size_t bytes = arr.values.size() * sizeof(double);
    const std::size_t at = out.size();
    out.resize(at + bytes);
    if (bytes) std::memcpy(out.data() + at, arr.values.data(), bytes);
  }
  out += "HBEND";
  detail::put_int<std::uint64_t>(out, fingerprint(out));
  return out;
}

inline ModelFile parse_model_file(std::string_view bytes) {
  detail::ByteReader rd(bytes);
  if (rd.take(4) != "HBMF") throw Error(ErrorCode::VersionOrCorruption, "not a model file (bad magic)");
  ModelFile mf;
  mf.version = rd.get_int<std::uint32_t>();
  if (mf.version != kModelFileVersion) {
    throw Error(ErrorCode::VersionOrCorruption, "model file version " + std::to_string(mf.version) + ", expected " +
                                                    std::to_string(kModelFileVersion));
  }
  const auto header_len = rd.get_int<std::uint64_t>();
  const auto header = rd.take(static_cast<std::size_t>(header_len));
  try {
    mf.header = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::VersionOrCorruption, "model header is not valid JSON");
  }
  const auto n_arrays = rd.get_int<std::uint32_t>();
  for (std::uint32_t a = 0; a < n_arrays; ++a) {
    const auto name_len = rd.get_int<std::uint32_t>();
    std::string name(rd.take(name_len));
    NamedArray arr;
    const auto rank = rd.get_int<std::uint32_t>();
    if (rank > 8) throw Error(ErrorCode::VersionOrCorruption, "implausible array rank");
    std::uint64_t count = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      arr.shape.push_back(rd.get_int<std::uint64_t>());
      count *= arr.shape.back();
    }
    if (count > (bytes.size() / sizeof(double))) throw Error(ErrorCode::VersionOrCorruption, "model file truncated");
    const auto raw = rd.take(static_cast<std::size_t>(count) * sizeof(double));
    arr.values.resize(static_cast<std::size_t>(count));
    if (count) std::memcpy(arr.values.data(), raw.data(), raw.size());
    mf.arrays.emplace(std::move(name), std::move(arr));
  }
  if (rd.take(5) != "HBEND") throw Error(ErrorCode::VersionOrCorruption, "missing end marker");
  const std::size_t sum_at = rd.pos();
  const auto checksum = rd.get_int<std::uint64_t>();
  if (checksum != fingerprint(bytes.substr(0, sum_at))) {
    throw Error(ErrorCode::VersionOrCorruption, "checksum mismatch");
  }
  if (rd.pos() != bytes.size()) throw Error(ErrorCode::VersionOrCorruption, "trailing bytes after end marker");
  return mf;
}

// ---------------------------------------------------------------------------
// TrainedModel <-> ModelFile

namespace detail {

inline void put_array(ModelFile& mf, const std::string& name, std::vector<std::uint64_t> shape, std::vector<double> values) {
  mf.arrays[name] = NamedArray{std::move(shape), std::move(values)};
}

inline const NamedArray& get_array(const ModelFile& mf, const std::string& name) {
  auto it = mf.arrays.find(name);
  if (it == mf.arrays.end()) throw Error(ErrorCode::VersionOrCorruption, "missing array " + name);
  return it->second;
}

inline nlohmann::json net_config_json(const NetConfig& c) {
  return {{"arch", arch_name(c.arch)},       {"embed_dim", c.embed_dim}, {"filter_sizes", c.filter_sizes},
          {"filters_per_size", c.filters_per_size}, {"hidden", c.hidden},       {"max_len", c.max_len}};
}

inline NetConfig net_config_from_json(const nlohmann::json& j) {
  NetConfig c;
  c.arch = j.at("arch").get<std::string>() == "textcnn" ? Arch::TextCnn : Arch::BiGru;
  c.embed_dim = j.at("embed_dim").get<std::size_t>();
  c.filter_sizes = j.at("filter_sizes").get<std::vector<std::size_t>>();
  c.filters_per_size = j.at("filters_per_size").get<std::size_t>();
  c.hidden = j.at("hidden").get<std::size_t>();
  c.max_len = j.at("max_len").get<std::size_t>();
  return c;
}

inline nlohmann::json encode_model(const TrainedModel& m, ModelFile& mf, const std::string& prefix) {
  nlohmann::json j;
  j["kind"] = model_kind_name(m.kind);
  switch (m.kind) {
    case ModelKind::LogReg:
    case ModelKind::Svm: {
      nlohmann::json blocks = nlohmann::json::array();
      for (std::size_t b = 0; b < m.features.blocks.size(); ++b) {
        const auto& t = m.features.blocks[b];
        blocks.push_back({{"analyzer", t.config.analyzer == Analyzer::Word ? "word" : "char"},
                          {"ngram_lo", t.config.ngram_lo},
                          {"ngram_hi", t.config.ngram_hi},
                          {"max_features", t.config.max_features},
                          {"stopwords", t.config.stopwords},
                          {"n_docs", t.n_docs},
                          {"terms", t.terms}});
        put_array(mf, prefix + "features." + std::to_string(b) + ".idf", {t.idf.size()}, t.idf);
      }
      j["feature_blocks"] = blocks;
      j["multinomial"] = m.linear.multinomial;
      j["dim"] = m.linear.dim;
      std::vector<double> W;
      W.reserve(kNumClasses * m.linear.dim);
      for (const auto& w : m.linear.W) W.insert(W.end(), w.begin(), w.end());
      put_array(mf, prefix + "linear.W", {kNumClasses, m.linear.dim}, std::move(W));
      put_array(mf, prefix + "linear.b", {kNumClasses}, {m.linear.b.begin(), m.linear.b.end()});
      put_array(mf, prefix + "linear.class_weights", {kNumClasses},
                {m.linear.class_weights.begin(), m.linear.class_weights.end()});
      break;
    }
    case ModelKind::TextCnn:
    case ModelKind::BiGru: {
      j["net"] = net_config_json(m.net.config);
      j["vocab"] = std::vector<std::string>(m.vocab.tokens.begin() + 1, m.vocab.tokens.end());
      j["embedding_coverage"] = m.embedding_coverage;
      j["best_epoch"] = m.history.best_epoch;
      for (const auto& [name, p] : m.net.params) {
        std::vector<std::uint64_t> shape(p.value.shape().begin(), p.value.shape().end());
        put_array(mf, prefix + "net." + name, std::move(shape), p.value.storage());
      }
      break;
    }
    case ModelKind::Majority: j["majority"] = to_index(m.majority); break;
    case ModelKind::Ensemble: {
      j["weights"] = m.weights;
      nlohmann::json members = nlohmann::json::array();
      for (std::size_t i = 0; i < m.members.size(); ++i) {
        members.push_back(encode_model(m.members[i], mf, prefix + "m" + std::to_string(i) + "/"));
      }
      j["members"] = members;
      break;
    }
  }
  return j;
}

inline TrainedModel decode_model(const nlohmann::json& j, const ModelFile& mf, const std::string& prefix) {
  TrainedModel m;
  const auto kind = parse_model_kind(j.at("kind").get<std::string>());
  if (!kind) throw Error(ErrorCode::VersionOrCorruption, "unknown model kind in file");
  m.kind = *kind;
  switch (m.kind) {
    case ModelKind::LogReg:
    case ModelKind::Svm: {
      const auto& blocks = j.at("feature_blocks");
      for (std::size_t b = 0; b < blocks.size(); ++b) {
        const auto& bj = blocks[b];
        TfidfModel t;
        t.config.analyzer = bj.at("analyzer").get<std::string>() == "word" ? Analyzer::Word : Analyzer::Char;
        t.config.ngram_lo = bj.at("ngram_lo").get<int>();
        t.config.ngram_hi = bj.at("ngram_hi").get<int>();
        t.config.max_features = bj.at("max_features").get<std::size_t>();
        t.config.stopwords = bj.at("stopwords").get<StopwordSet>();
        t.n_docs = bj.at("n_docs").get<std::size_t>();
        t.terms = bj.at("terms").get<std::vector<std::string>>();
        t.idf = get_array(mf, prefix + "features." + std::to_string(b) + ".idf").values;
        if (t.idf.size() != t.terms.size()) throw Error(ErrorCode::VersionOrCorruption, "idf/terms size mismatch");
        t.rebuild_index();
        m.features.blocks.push_back(std::move(t));
      }
      m.linear.kind = m.kind == ModelKind::LogReg ? LinearKind::LogReg : LinearKind::Svm;
      m.linear.multinomial = j.at("multinomial").get<bool>();
      m.linear.dim = j.at("dim").get<std::size_t>();
      const auto& W = get_array(mf, prefix + "linear.W");
      if (W.values.size() != kNumClasses * m.linear.dim) throw Error(ErrorCode::VersionOrCorruption, "weight size");
      for (std::size_t c = 0; c < kNumClasses; ++c) {
        m.linear.W[c].assign(W.values.begin() + static_cast<std::ptrdiff_t>(c * m.linear.dim),
                             W.values.begin() + static_cast<std::ptrdiff_t>((c + 1) * m.linear.dim));
      }
      const auto& b = get_array(mf, prefix + "linear.b").values;
      const auto& cw = get_array(mf, prefix + "linear.class_weights").values;
      if (b.size() != kNumClasses || cw.size() != kNumClasses) throw Error(ErrorCode::VersionOrCorruption, "bias size");
      for (std::size_t c = 0; c < kNumClasses; ++c) {
        m.linear.b[c] = b[c];
        m.linear.class_weights[c] = cw[c];
      }
      if (m.features.dim() != m.linear.dim) throw Error(ErrorCode::VersionOrCorruption, "feature/weight dim mismatch");
      break;
    }
    case ModelKind::TextCnn:
    case ModelKind::BiGru: {
      m.net.config = net_config_from_json(j.at("net"));
      for (auto& t : j.at("vocab").get<std::vector<std::string>>()) m.vocab.tokens.push_back(std::move(t));
      m.vocab.rebuild_index();
      m.net.vocab_size = m.vocab.size();
      m.embedding_coverage = j.at("embedding_coverage").get<double>();
      m.history.best_epoch = j.at("best_epoch").get<int>();
      const std::string net_prefix = prefix + "net.";
      for (const auto& [name, arr] : mf.arrays) {
        if (name.compare(0, net_prefix.size(), net_prefix) != 0) continue;
        const std::string pname = name.substr(net_prefix.size());
        if (pname.find('/') != std::string::npos) continue;
        nn::Shape shape(arr.shape.begin(), arr.shape.end());
        m.net.params.add(pname, nn::Tensor<double>(std::move(shape), arr.values));
      }
      // shape check against a freshly initialized network
      const auto ref = init_net<double>(m.net.config, m.net.vocab_size, 0);
      if (ref.params.size() != m.net.params.size()) throw Error(ErrorCode::VersionOrCorruption, "parameter set mismatch");
      for (const auto& [name, p] : ref.params) {
        if (!m.net.params.contains(name) || m.net.params.value(name).shape() != p.value.shape()) {
          throw Error(ErrorCode::VersionOrCorruption, "parameter " + name + " missing or misshapen");
        }
      }
      break;
    }
    case ModelKind::Majority: m.majority = label_from_index(j.at("majority").get<int>()); break;
    case ModelKind::Ensemble: {
      m.weights = j.at("weights").get<std::vector<double>>();
      const auto& members = j.at("members");
      for (std::size_t i = 0; i < members.size(); ++i) {
        m.members.push_back(decode_model(members[i], mf, prefix + "m" + std::to_string(i) + "/"));
      }
      if (m.members.size() != m.weights.size()) throw Error(ErrorCode::VersionOrCorruption, "ensemble weights");
      break;
    }
  }
  return m;
}

}  // namespace detail

struct ModelMetadata {
  std::uint64_t corpus_fingerprint = 0;
  std::map<std::string, std::string> config;  // training run echo
};

inline ModelFile to_model_file(const TrainedModel& model, const ModelMetadata& meta) {
  ModelFile mf;
  mf.header["format"] = "hatebench-model";
  mf.header["corpus_fingerprint"] = meta.corpus_fingerprint;
  mf.header["config"] = meta.config;
  mf.header["model"] = detail::encode_model(model, mf, "");
  return mf;
}

inline TrainedModel from_model_file(const ModelFile& mf, ModelMetadata* meta = nullptr) {
  try {
    if (mf.header.at("format").get<std::string>() != "hatebench-model") {
      throw Error(ErrorCode::VersionOrCorruption, "unexpected header format");
    }
    if (meta) {
      meta->corpus_fingerprint = mf.header.at("corpus_fingerprint").get<std::uint64_t>();
      meta->config = mf.header.at("config").get<std::map<std::string, std::string>>();
    }
    return detail::decode_model(mf.header.at("model"), mf, "");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::VersionOrCorruption, std::string("model header: ") + e.what());
  }
}

inline void save_model(const std::string& path, const TrainedModel& model, const ModelMetadata& meta) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  const auto bytes = serialize_model_file(to_model_file(model, meta));
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::Io, "write failed: " + path);
}

inline TrainedModel load_model(const std::string& path, ModelMetadata* meta = nullptr) {
  return from_model_file(parse_model_file(detail::read_file(path)), meta);
}

}  // namespace hatebench
