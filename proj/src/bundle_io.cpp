#include "pfair/bundle_io.hpp"

#include <fstream>

#include "pfair/error.hpp"
#include "pfair/fingerprint.hpp"

namespace pfair {

using nlohmann::json;

namespace {

std::uint64_t parse_hex(const json& j) {
  const auto s = j.get<std::string>();
  std::size_t used = 0;
  const auto v = std::stoull(s, &used, 16);
  if (used != s.size()) throw Error(ErrorCode::config_error, "bad fingerprint '" + s + "'");
  return v;
}

std::string_view head_name(HeadLoss loss) {
  switch (loss) {
    case HeadLoss::squared: return "squared";
    case HeadLoss::sigmoid: return "sigmoid";
    case HeadLoss::softmax: return "softmax";
  }
  return "?";
}

HeadLoss head_from(const std::string& s) {
  if (s == "squared") return HeadLoss::squared;
  if (s == "sigmoid") return HeadLoss::sigmoid;
  if (s == "softmax") return HeadLoss::softmax;
  throw Error(ErrorCode::config_error, "unknown head '" + s + "'");
}

}  // namespace

json column_to_json(const ColumnSpec& column) {
  json j{{"name", column.name}, {"kind", std::string(to_string(column.kind))}};
  if (column.discrete()) j["levels"] = column.levels;
  if (!column.collapse.empty()) j["collapse"] = column.collapse;
  return j;
}

ColumnSpec column_from_json(const json& j) {
  ColumnSpec c;
  c.name = j.at("name").get<std::string>();
  c.kind = column_kind_from_string(j.at("kind").get<std::string>());
  if (j.contains("levels")) c.levels = j.at("levels").get<std::vector<std::string>>();
  if (c.kind == ColumnKind::binary && c.levels.empty()) c.levels = {"0", "1"};
  if (j.contains("collapse")) c.collapse = j.at("collapse").get<std::map<std::string, std::string>>();
  return c;
}

json variable_to_json(const VariableSpec& variable) {
  json cols = json::array();
  for (const auto& c : variable.columns) cols.push_back(column_to_json(c));
  return {{"node", variable.node}, {"columns", cols}};
}

VariableSpec variable_from_json(const json& j) {
  VariableSpec v;
  v.node = j.at("node").get<std::string>();
  for (const auto& c : j.at("columns")) v.columns.push_back(column_from_json(c));
  return v;
}

json module_to_json(const LocalModule& m) {
  json parents = json::array();
  for (const auto& p : m.parent_specs()) parents.push_back(variable_to_json(p));
  json j{{"target", variable_to_json(m.target_spec())},
         {"parents", parents},
         {"kind", std::string(to_string(m.kind()))},
         {"training_loss", m.training_loss},
         {"initial_loss", m.initial_loss},
         {"loss_trace", m.loss_trace},
         {"rank_deficient", m.rank_deficient},
         {"seed", m.seed}};
  if (m.kind() == HypothesisKind::linear) {
    j["coefficients"] = m.coefficients();
    return j;
  }
  json layers = json::array();
  for (const auto& l : m.net().layers()) {
    json lj{{"in", l.in}, {"out", l.out}, {"weight", l.weight}, {"bias", l.bias}, {"normalized", l.normalized}};
    if (l.normalized) {
      lj["gamma"] = l.gamma;
      lj["beta"] = l.beta;
      lj["running_mean"] = l.running_mean;
      lj["running_var"] = l.running_var;
    }
    layers.push_back(std::move(lj));
  }
  json heads = json::array();
  for (const auto& h : m.net().heads()) heads.push_back({{"loss", std::string(head_name(h.loss))}, {"width", h.width}});
  j["network"] = {{"layers", layers}, {"heads", heads}};
  j["input_shift"] = m.input_shift();
  j["input_scale"] = m.input_scale();
  j["target_shift"] = m.target_shift();
  j["target_scale"] = m.target_scale();
  return j;
}

LocalModule module_from_json(const json& j) {
  VariableSpec target = variable_from_json(j.at("target"));
  std::vector<VariableSpec> pspecs;
  std::vector<std::string> parents;
  for (const auto& p : j.at("parents")) {
    pspecs.push_back(variable_from_json(p));
    parents.push_back(pspecs.back().node);
  }
  const auto kind = hypothesis_kind_from_string(j.at("kind").get<std::string>());
  const std::string name = target.node;
  LocalModule m;
  if (kind == HypothesisKind::linear) {
    m = LocalModule::linear(name, std::move(target), std::move(parents), std::move(pspecs),
                            j.at("coefficients").get<std::vector<std::vector<double>>>());
  } else {
    std::vector<DenseLayer> layers;
    for (const auto& lj : j.at("network").at("layers")) {
      DenseLayer l;
      l.in = lj.at("in").get<std::size_t>();
      l.out = lj.at("out").get<std::size_t>();
      l.weight = lj.at("weight").get<std::vector<double>>();
      l.bias = lj.at("bias").get<std::vector<double>>();
      l.normalized = lj.at("normalized").get<bool>();
      if (l.normalized) {
        l.gamma = lj.at("gamma").get<std::vector<double>>();
        l.beta = lj.at("beta").get<std::vector<double>>();
        l.running_mean = lj.at("running_mean").get<std::vector<double>>();
        l.running_var = lj.at("running_var").get<std::vector<double>>();
      }
      layers.push_back(std::move(l));
    }
    std::vector<Head> heads;
    for (const auto& hj : j.at("network").at("heads"))
      heads.push_back({head_from(hj.at("loss").get<std::string>()), hj.at("width").get<std::size_t>()});
    m = LocalModule::network(name, std::move(target), std::move(parents), std::move(pspecs), kind,
                             Network(std::move(layers), std::move(heads)),
                             j.at("input_shift").get<std::vector<double>>(), j.at("input_scale").get<std::vector<double>>(),
                             j.at("target_shift").get<std::vector<double>>(),
                             j.at("target_scale").get<std::vector<double>>());
  }
  m.training_loss = j.value("training_loss", 0.0);
  m.initial_loss = j.value("initial_loss", 0.0);
  m.loss_trace = j.value("loss_trace", std::vector<double>{});
  m.rank_deficient = j.value("rank_deficient", false);
  m.seed = j.value("seed", std::uint64_t{0});
  return m;
}

json bundle_to_json(const ModelBundle& bundle) {
  json modules = json::array();
  for (const auto& [_, m] : bundle.modules()) modules.push_back(module_to_json(m));
  return {{"format", "pfair-bundle"},
          {"version", kBundleFormatVersion},
          {"graph_fingerprint", to_hex(bundle.graph_fingerprint())},
          {"parameter_fingerprint", to_hex(bundle.parameter_fingerprint())},
          {"modules", modules}};
}

ModelBundle bundle_from_json(const json& j) {
  try {
    if (j.value("format", "") != "pfair-bundle") throw Error(ErrorCode::config_error, "not a bundle artifact");
    const int version = j.at("version").get<int>();
    if (version != kBundleFormatVersion)
      throw Error(ErrorCode::config_error, "unsupported bundle version " + std::to_string(version));
    std::map<std::string, LocalModule> modules;
    for (const auto& mj : j.at("modules")) {
      auto m = module_from_json(mj);
      const std::string name = m.target();
      modules.emplace(name, std::move(m));
    }
    ModelBundle bundle(parse_hex(j.at("graph_fingerprint")), std::move(modules));
    const auto stored = parse_hex(j.at("parameter_fingerprint"));
    if (stored != bundle.parameter_fingerprint())
      throw Error(ErrorCode::fingerprint_mismatch, "bundle parameters do not match the stored fingerprint");
    return bundle;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::config_error, std::string("malformed bundle: ") + e.what());
  }
}

void save_bundle(const ModelBundle& bundle, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io_error, "cannot write '" + path.string() + "'");
  out << bundle_to_json(bundle).dump(1) << '\n';
}

ModelBundle load_bundle(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot open '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::config_error, "'" + path.string() + "' is not valid JSON: " + e.what());
  }
  return bundle_from_json(j);
}

}  // namespace pfair
