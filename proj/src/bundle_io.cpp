// SPDX-License-Identifier: Apache-2.0

#include "gwseg/bundle_io.hpp"

#include <sstream>

#include <json.hpp>

#include "binary_io.hpp"

namespace gwseg {

namespace {

using nlohmann::json;

void put_matrix(std::string& out, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) detail::put_f32(out, static_cast<float>(m.data()[i]));
}

void put_vector(std::string& out, const Vector& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) detail::put_f32(out, static_cast<float>(v[i]));
}

class PayloadReader {
 public:
  PayloadReader(const std::string& bytes, std::size_t offset) : bytes_(bytes), pos_(offset) {}

  void read_into(double* dst, Eigen::Index count) {
    for (Eigen::Index i = 0; i < count; ++i, pos_ += 4) dst[i] = detail::get_f32(bytes_.data() + pos_);
  }
  Matrix matrix(Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    read_into(m.data(), m.size());
    return m;
  }
  Vector vector(Eigen::Index n) {
    Vector v(n);
    read_into(v.data(), n);
    return v;
  }

 private:
  const std::string& bytes_;
  std::size_t pos_;
};

json registry_json(const ClassRegistry& r) {
  json names = json::object();
  for (const auto& [id, name] : r.names) names[std::to_string(id)] = name;
  return {{"base", r.base_classes}, {"novel", r.novel_classes}, {"names", names}};
}

ClassRegistry registry_from(const json& j) {
  ClassRegistry r;
  r.base_classes = j.at("base").get<std::vector<ClassId>>();
  r.novel_classes = j.at("novel").get<std::vector<ClassId>>();
  for (const auto& [key, value] : j.at("names").items()) {
    r.names[std::stoi(key)] = value.get<std::string>();
  }
  return r;
}

json hyper_json(const Hyperparameters& h) {
  return {{"tau", h.tau},
          {"beta", h.beta},
          {"alpha", h.alpha},
          {"words", h.words},
          {"use_geometric_representation", h.use_geometric_representation},
          {"feature_source", h.feature_source == FeatureSource::Ingested ? "ingested" : "handcrafted"},
          {"low_neighbors", h.features.low_neighbors},
          {"semantic_neighbors", h.features.semantic_neighbors},
          {"block_size", h.sampling.block_size},
          {"points_per_block", h.sampling.points_per_block}};
}

Hyperparameters hyper_from(const json& j) {
  Hyperparameters h;
  h.tau = j.at("tau").get<double>();
  h.beta = j.at("beta").get<double>();
  h.alpha = j.at("alpha").get<double>();
  h.words = j.at("words").get<int>();
  h.use_geometric_representation = j.at("use_geometric_representation").get<bool>();
  const auto source = j.at("feature_source").get<std::string>();
  if (source != "handcrafted" && source != "ingested") {
    throw InvariantError("unknown feature source '" + source + "'");
  }
  h.feature_source = source == "ingested" ? FeatureSource::Ingested : FeatureSource::Handcrafted;
  h.features.low_neighbors = j.at("low_neighbors").get<std::size_t>();
  h.features.semantic_neighbors = j.at("semantic_neighbors").get<std::vector<std::size_t>>();
  h.sampling.block_size = j.at("block_size").get<double>();
  h.sampling.points_per_block = j.at("points_per_block").get<std::size_t>();
  return h;
}

}  // namespace

std::string encode_bundle(const ModelBundle& bundle) {
  bundle.validate(false);
  const Vocabulary& v = bundle.vocab;
  const FusionWeights& f = bundle.fusion;

  json classes = json::array();
  std::string payload;
  put_matrix(payload, v.words);
  put_matrix(payload, f.weight);
  put_vector(payload, f.bias);
  for (const auto& [cls, cp] : bundle.classes) {
    classes.push_back({{"id", cls}, {"alpha", cp.pruned.alpha}});
    put_vector(payload, cp.semantic.weight);
    put_vector(payload, cp.geometric.histogram);
    put_vector(payload, cp.pruned.histogram);
  }

  const json meta = {
      {"format_version", kBundleFormatVersion},
      {"hyperparameters", hyper_json(bundle.hyper)},
      {"registry", registry_json(bundle.registry)},
      {"vocabulary",
       {{"words", v.size()},
        {"dim", v.descriptor_dim()},
        {"kmeans_seed", v.build_config.seed},
        {"kmeans_max_iterations", v.build_config.max_iterations},
        {"kmeans_tolerance", v.build_config.tolerance},
        {"member_counts", v.member_counts},
        {"objective_trace", v.objective_trace}}},
      {"fusion",
       {{"fused_dim", f.fused_dim()},
        {"geo_dim", f.geo_dim},
        {"sem_dim", f.sem_dim},
        {"trained", f.trained}}},
      {"classes", classes},
      {"payload_bytes", payload.size()}};

  const std::string meta_text = meta.dump();
  return "gwbundle v" + std::to_string(kBundleFormatVersion) + " " +
         std::to_string(meta_text.size()) + "\n" + meta_text + payload;
}

ModelBundle decode_bundle(const std::string& bytes) {
  const std::string header = detail::header_line(bytes, 256);
  std::istringstream hs(header);
  std::string magic, version, trailing;
  long long meta_len = -1;
  hs >> magic >> version >> meta_len;
  if (!hs || magic != "gwbundle" || meta_len < 0 || (hs >> trailing)) {
    throw FormatError("malformed bundle header '" + header + "'");
  }
  if (version != "v" + std::to_string(kBundleFormatVersion)) {
    throw FormatError("unsupported bundle version '" + version + "'");
  }
  const std::size_t meta_at = header.size() + 1;
  if (bytes.size() < meta_at + static_cast<std::size_t>(meta_len)) {
    throw FormatError("truncated bundle metadata: expected " +
                      std::to_string(meta_at + meta_len) + " bytes, got " +
                      std::to_string(bytes.size()));
  }
  json meta;
  try {
    meta = json::parse(bytes.substr(meta_at, static_cast<std::size_t>(meta_len)));
  } catch (const json::exception& e) {
    throw FormatError(std::string("bundle metadata is not valid JSON: ") + e.what());
  }

  ModelBundle b;
  std::size_t payload_at = meta_at + static_cast<std::size_t>(meta_len);
  try {
    if (meta.at("format_version").get<int>() != kBundleFormatVersion) {
      throw FormatError("unsupported bundle format_version " + meta.at("format_version").dump());
    }
    b.hyper = hyper_from(meta.at("hyperparameters"));
    b.registry = registry_from(meta.at("registry"));
    const json& vj = meta.at("vocabulary");
    const json& fj = meta.at("fusion");
    const auto words = vj.at("words").get<Eigen::Index>();
    const auto dim = vj.at("dim").get<Eigen::Index>();
    const auto fused = fj.at("fused_dim").get<Eigen::Index>();
    b.fusion.geo_dim = fj.at("geo_dim").get<int>();
    b.fusion.sem_dim = fj.at("sem_dim").get<int>();
    b.fusion.trained = fj.at("trained").get<bool>();
    const Eigen::Index in = fused > 0 ? b.fusion.input_dim() : 0;
    if (words < 0 || dim < 0 || fused < 0 || b.fusion.geo_dim < 0 || b.fusion.sem_dim < 0) {
      throw InvariantError("negative dimension in bundle metadata");
    }

    const auto& classes = meta.at("classes");
    const std::size_t floats = static_cast<std::size_t>(words * dim + fused * in + fused) +
                               classes.size() * static_cast<std::size_t>(fused + 2 * words);
    const std::size_t expected = payload_at + 4 * floats;
    if (meta.at("payload_bytes").get<std::size_t>() != 4 * floats) {
      throw InvariantError("payload size in metadata disagrees with the declared dimensions");
    }
    if (bytes.size() != expected) {
      throw FormatError("bundle payload size mismatch: expected " + std::to_string(expected) +
                        " bytes, got " + std::to_string(bytes.size()));
    }

    PayloadReader reader(bytes, payload_at);
    b.vocab.words = reader.matrix(words, dim);
    b.vocab.build_config.seed = vj.at("kmeans_seed").get<std::uint64_t>();
    b.vocab.build_config.max_iterations = vj.at("kmeans_max_iterations").get<int>();
    b.vocab.build_config.tolerance = vj.at("kmeans_tolerance").get<double>();
    b.vocab.member_counts = vj.at("member_counts").get<std::vector<std::size_t>>();
    b.vocab.objective_trace = vj.at("objective_trace").get<std::vector<double>>();
    b.fusion.weight = reader.matrix(fused, in);
    b.fusion.bias = reader.vector(fused);
    for (const auto& cj : classes) {
      const auto cls = cj.at("id").get<ClassId>();
      ClassPrototypes cp;
      cp.semantic.class_id = cls;
      cp.semantic.weight = reader.vector(fused);
      cp.geometric.class_id = cls;
      cp.geometric.histogram = reader.vector(words);
      cp.pruned.class_id = cls;
      cp.pruned.histogram = reader.vector(words);
      cp.pruned.pruned = true;
      cp.pruned.alpha = cj.at("alpha").get<double>();
      if (!b.classes.emplace(cls, std::move(cp)).second) {
        throw InvariantError("class " + std::to_string(cls) + " appears twice in the bundle");
      }
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("bundle metadata is incomplete: ") + e.what());
  }
  b.validate(false);
  return b;
}

void save_bundle(const ModelBundle& bundle, const std::filesystem::path& path) {
  detail::write_file(path, encode_bundle(bundle));
}

ModelBundle load_bundle(const std::filesystem::path& path) {
  try {
    return decode_bundle(detail::read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const InvariantError& e) {
    throw InvariantError(path.string() + ": " + e.what());
  }
}

bool bundles_equal(const ModelBundle& a, const ModelBundle& b) {
  auto same_matrix = [](const Matrix& x, const Matrix& y) {
    return x.rows() == y.rows() && x.cols() == y.cols() && x == y;
  };
  const auto& va = a.vocab;
  const auto& vb = b.vocab;
  if (!same_matrix(va.words, vb.words) || va.member_counts != vb.member_counts ||
      va.objective_trace != vb.objective_trace || va.build_config.seed != vb.build_config.seed ||
      va.build_config.max_iterations != vb.build_config.max_iterations ||
      va.build_config.tolerance != vb.build_config.tolerance) {
    return false;
  }
  if (!(a.fusion == b.fusion) || !(a.registry == b.registry) || !(a.hyper == b.hyper)) return false;
  if (a.classes.size() != b.classes.size()) return false;
  for (const auto& [cls, cp] : a.classes) {
    auto it = b.classes.find(cls);
    if (it == b.classes.end()) return false;
    if (!(cp.semantic == it->second.semantic) || !(cp.geometric == it->second.geometric) ||
        !(cp.pruned == it->second.pruned)) {
      return false;
    }
  }
  return true;
}

}  // namespace gwseg
