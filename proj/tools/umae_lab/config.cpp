#include "config.hpp"

#include <fstream>
#include <set>

#include "umae/error.hpp"

namespace umae::lab {
namespace {

constexpr const char* kModule = "config";

void check_keys(const nlohmann::json& j, const std::string& section, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ValidationError(kModule, "section '" + section + "' must be an object");
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key)) throw ValidationError(kModule, "unknown key '" + section + (section.empty() ? "" : ".") + key + "'");
}

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

const nlohmann::json& section(const nlohmann::json& j, const char* key) {
  static const nlohmann::json empty = nlohmann::json::object();
  return j.contains(key) ? j.at(key) : empty;
}

DatasetSection parse_dataset(const nlohmann::json& j) {
  check_keys(j, "dataset", {"kind", "synthetic", "path", "max_records", "patch_side", "levels"});
  DatasetSection d;
  read(j, "kind", d.kind);
  read(j, "path", d.path);
  read(j, "max_records", d.max_records);
  read(j, "patch_side", d.patch_side);
  read(j, "levels", d.levels);
  const auto& s = section(j, "synthetic");
  check_keys(s, "dataset.synthetic",
             {"classes", "images_per_class", "n", "s", "vocab_size", "class_signal_positions", "noise_positions", "seed"});
  auto& spec = d.synthetic;
  spec.class_signal_positions = {0};
  spec.noise_positions = {1};
  read(s, "classes", spec.classes);
  read(s, "images_per_class", spec.images_per_class);
  read(s, "n", spec.n);
  read(s, "s", spec.s);
  read(s, "vocab_size", spec.vocab_size);
  read(s, "class_signal_positions", spec.class_signal_positions);
  read(s, "noise_positions", spec.noise_positions);
  read(s, "seed", spec.seed);
  static const std::set<std::string> kinds{"doc2x2", "synthetic", "cifar", "file"};
  if (!kinds.count(d.kind)) throw ValidationError(kModule, "dataset.kind must be doc2x2, synthetic, cifar or file");
  if ((d.kind == "cifar" || d.kind == "file") && d.path.empty())
    throw ValidationError(kModule, "dataset.path is required for kind '" + d.kind + "'");
  if (d.levels < 0 || d.levels == 1) throw ValidationError(kModule, "dataset.levels must be 0 or >= 2");
  return d;
}

std::string mode_name(MaskMode m) { return m == MaskMode::Exhaustive ? "exhaustive" : "sampled"; }

}  // namespace

ExperimentConfig parse_config(const nlohmann::json& j) {
  try {
    check_keys(j, "", {"dataset", "mask", "model", "train", "analysis", "report", "output"});
    ExperimentConfig c;
    c.dataset = parse_dataset(section(j, "dataset"));

    const auto& m = section(j, "mask");
    check_keys(m, "mask", {"n", "rho", "mode", "count", "seed", "cap"});
    c.mask.n = 0;
    read(m, "n", c.mask.n);
    read(m, "rho", c.mask.rho);
    read(m, "count", c.mask.count);
    read(m, "seed", c.mask.seed);
    read(m, "cap", c.mask.cap);
    const std::string mode = m.value("mode", std::string("exhaustive"));
    if (mode != "exhaustive" && mode != "sampled") throw ValidationError(kModule, "mask.mode must be exhaustive or sampled");
    c.mask.mode = mode == "exhaustive" ? MaskMode::Exhaustive : MaskMode::Sampled;

    const auto& md = section(j, "model");
    check_keys(md, "model", {"n", "s", "k", "arch", "hidden", "normalize_encoder", "seed", "checkpoint"});
    c.model.n = 0;
    c.model.s = 0;
    read(md, "n", c.model.n);
    read(md, "s", c.model.s);
    read(md, "k", c.model.k);
    read(md, "hidden", c.model.hidden);
    read(md, "normalize_encoder", c.model.normalize_encoder);
    read(md, "seed", c.model.seed);
    read(md, "checkpoint", c.checkpoint);
    if (md.contains("arch")) c.model.arch = arch_from_string(md.at("arch").get<std::string>());

    const auto& t = section(j, "train");
    check_keys(t, "train", {"loss", "lambda", "epochs", "batch_size", "learning_rate", "momentum", "weight_decay", "seed",
                            "snapshot_every", "probe_draws"});
    c.train = train_config_from_json(t);

    const auto& a = section(j, "analysis");
    check_keys(a, "analysis", {"lambda", "k", "rho_grid", "metric", "pairs_budget", "seed", "pseudo", "lipschitz_samples"});
    read(a, "lambda", c.analysis.lambda);
    read(a, "k", c.analysis.k);
    read(a, "rho_grid", c.analysis.rho_grid);
    read(a, "metric", c.analysis.metric);
    read(a, "pairs_budget", c.analysis.pairs_budget);
    read(a, "seed", c.analysis.seed);
    read(a, "pseudo", c.analysis.pseudo);
    read(a, "lipschitz_samples", c.analysis.lipschitz_samples);
    if (c.analysis.metric != "average" && c.analysis.metric != "max" && c.analysis.metric != "both")
      throw ValidationError(kModule, "analysis.metric must be average, max or both");
    if (c.analysis.pseudo != "identity" && c.analysis.pseudo != "trained")
      throw ValidationError(kModule, "analysis.pseudo must be identity or trained");
    if (c.analysis.lambda < 0.0) throw ValidationError(kModule, "analysis.lambda must be >= 0");
    if (c.analysis.k < 0) throw ValidationError(kModule, "analysis.k must be >= 0");
    if (c.analysis.lipschitz_samples < 0) throw ValidationError(kModule, "analysis.lipschitz_samples must be >= 0");

    const auto& r = section(j, "report");
    check_keys(r, "report", {"artifacts"});
    read(r, "artifacts", c.artifacts);
    read(j, "output", c.output);
    if (c.output.empty()) throw ValidationError(kModule, "output directory must not be empty");
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(kModule, std::string("malformed config: ") + e.what());
  }
}

nlohmann::json to_json(const ExperimentConfig& c) {
  const auto& s = c.dataset.synthetic;
  nlohmann::json j;
  j["dataset"] = {{"kind", c.dataset.kind},
                  {"path", c.dataset.path},
                  {"max_records", c.dataset.max_records},
                  {"patch_side", c.dataset.patch_side},
                  {"levels", c.dataset.levels},
                  {"synthetic",
                   {{"classes", s.classes},
                    {"images_per_class", s.images_per_class},
                    {"n", s.n},
                    {"s", s.s},
                    {"vocab_size", s.vocab_size},
                    {"class_signal_positions", s.class_signal_positions},
                    {"noise_positions", s.noise_positions},
                    {"seed", s.seed}}}};
  j["mask"] = {{"n", c.mask.n},         {"rho", c.mask.rho},   {"mode", mode_name(c.mask.mode)},
               {"count", c.mask.count}, {"seed", c.mask.seed}, {"cap", c.mask.cap}};
  j["model"] = {{"n", c.model.n},
                {"s", c.model.s},
                {"k", c.model.k},
                {"arch", to_string(c.model.arch)},
                {"hidden", c.model.hidden},
                {"normalize_encoder", c.model.normalize_encoder},
                {"seed", c.model.seed},
                {"checkpoint", c.checkpoint}};
  j["train"] = train_config_to_json(c.train);
  j["analysis"] = {{"lambda", c.analysis.lambda},
                   {"k", c.analysis.k},
                   {"rho_grid", c.analysis.rho_grid},
                   {"metric", c.analysis.metric},
                   {"pairs_budget", c.analysis.pairs_budget},
                   {"seed", c.analysis.seed},
                   {"pseudo", c.analysis.pseudo},
                   {"lipschitz_samples", c.analysis.lipschitz_samples}};
  j["report"] = {{"artifacts", c.artifacts}};
  j["output"] = c.output;
  return j;
}

void apply_override(nlohmann::json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ValidationError(kModule, "override '" + assignment + "' is not of the form key=value");
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  nlohmann::json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ValidationError(kModule, "override key '" + path + "' has an empty component");
    if (!node->is_object()) throw ValidationError(kModule, "override '" + path + "' descends into a non-object");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    if (node->is_null()) *node = nlohmann::json::object();
    start = dot + 1;
  }
}

Dataset load_dataset(const DatasetSection& d) {
  Dataset ds;
  if (d.kind == "doc2x2") {
    ds = generate_synthetic(doc2x2_spec());
  } else if (d.kind == "synthetic") {
    ds = generate_synthetic(d.synthetic);
  } else if (d.kind == "cifar") {
    ds = load_cifar10(d.path, d.max_records, d.patch_side);
    if (d.levels > 0) ds = quantize(ds, d.levels);
  } else {
    std::ifstream in(d.path);
    if (!in) throw ValidationError(kModule, "cannot open dataset file " + d.path);
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ValidationError(kModule, "dataset file " + d.path + " is not valid JSON");
    ds = dataset_from_json(j);
  }
  ds.validate();
  return ds;
}

void resolve(ExperimentConfig& c, const Dataset& ds) {
  if (c.mask.n == 0) c.mask.n = ds.n;
  if (c.model.n == 0) c.model.n = ds.n;
  if (c.model.s == 0) c.model.s = ds.s;
  if (c.mask.n != ds.n) throw ValidationError(kModule, "mask.n = " + std::to_string(c.mask.n) + " but the dataset has n = " + std::to_string(ds.n));
  if (c.model.n != ds.n || c.model.s != ds.s)
    throw ValidationError(kModule, "model shape (n, s) does not match the dataset");
  c.mask.validate();
  if (c.mask.mode == MaskMode::Sampled && c.mask.count < 1)
    throw ValidationError(kModule, "mask.count must be >= 1 in sampled mode");
  c.train.validate();
}

}  // namespace umae::lab
