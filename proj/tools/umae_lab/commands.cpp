#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "svg.hpp"
#include "umae/analysis.hpp"
#include "umae/error.hpp"
#include "umae/graph.hpp"
#include "umae/losses.hpp"
#include "umae/train.hpp"

#ifndef UMAE_VERSION_STRING
#define UMAE_VERSION_STRING "unknown"
#endif

namespace umae::lab {
namespace {

constexpr const char* kModule = "cli";

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

EncoderDecoder load_model(const RunContext& ctx) {
  if (ctx.config.checkpoint.empty()) return init_model(ctx.config.model);
  const std::string text = read_file(ctx.config.checkpoint);
  nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ValidationError(kModule, "checkpoint " + ctx.config.checkpoint + " is not valid JSON");
  EncoderDecoder m = model_from_json(j);
  if (m.config().n != ctx.dataset.n || m.config().s != ctx.dataset.s)
    throw ValidationError(kModule, "checkpoint shape does not match the dataset");
  return m;
}

int generate(const RunContext& ctx, OutputSet& out, std::ostream& log) {
  out.add("dataset.json", dump(dataset_to_json(ctx.dataset)));
  log << "dataset: " << ctx.dataset.size() << " images, n=" << ctx.dataset.n << ", s=" << ctx.dataset.s << "\n";
  return 0;
}

int graph(const RunContext& ctx, OutputSet& out, std::ostream& log) {
  const MaskGraph g = build_mask_graph(ctx.dataset, ctx.config.mask);
  out.add("graph.json", dump(graph_to_json(g)));
  const AugGraph aug = build_aug_graph(g);
  out.add("spectrum.csv", spectrum_csv(aug));
  log << "graph: " << g.n1_count() << " unmasked views, " << g.n2_count() << " masked views, " << g.edges.size()
      << " edges\n";
  return 0;
}

int train_command(const RunContext& ctx, OutputSet& out, std::ostream& log) {
  const TrainResult r = train(load_model(ctx), ctx.dataset, ctx.config.mask, ctx.config.train);
  out.add("model.json", dump(model_to_json(r.model)));
  out.add("trace.csv", r.trace.to_csv());
  std::string erank = "epoch,erank\n";
  for (const auto& s : r.trace.records) erank += std::to_string(s.epoch) + "," + format_double(s.erank) + "\n";
  out.add("erank.csv", erank);
  const auto& last = r.trace.records.back();
  log << "train: epoch " << last.epoch << " loss " << format_double(last.loss) << " erank "
      << format_double(last.erank) << " probe_acc " << format_double(last.probe_acc) << "\n";
  return 0;
}

int verify(const RunContext& ctx, OutputSet& out, std::ostream& log) {
  const MaskGraph g = build_mask_graph(ctx.dataset, ctx.config.mask);
  const AugGraph aug = build_aug_graph(g);
  const EncoderDecoder m = load_model(ctx);
  BoundOptions opts;
  opts.lipschitz.samples = ctx.config.analysis.lipschitz_samples;
  opts.lipschitz.seed = ctx.config.analysis.seed;
  if (ctx.config.analysis.pseudo == "trained") {
    PseudoTrainOptions po;
    po.seed = ctx.config.analysis.seed;
    opts.hg = make_pseudo_encoder(g, PseudoMode::Trained, po);
  }
  const int k = ctx.config.analysis.k > 0 ? ctx.config.analysis.k : m.config().k;
  const BoundReport r = verify_bounds(m, g, aug, ctx.dataset, k, ctx.config.analysis.lambda, opts);
  out.add("bounds.json", dump(to_json(r)));
  int failed = 0;
  for (const auto& e : r.entries) {
    log << e.id << " lhs " << format_double(e.lhs) << " rhs " << format_double(e.rhs) << " slack "
        << format_double(e.slack) << (e.asserted ? (e.pass ? " pass" : " FAIL") : " reported") << "\n";
    if (e.asserted && !e.pass) ++failed;
  }
  if (failed > 0) {
    log << "verify: " << failed << " asserted bound(s) failed\n";
    return 2;
  }
  return 0;
}

int sweep(const RunContext& ctx, OutputSet& out, std::ostream& log) {
  const auto& a = ctx.config.analysis;
  std::vector<DistanceMetric> metrics;
  if (a.metric == "both")
    metrics = {DistanceMetric::Average, DistanceMetric::Max};
  else
    metrics = {metric_from_string(a.metric)};
  for (auto metric : metrics) {
    SweepOptions opts;
    opts.rho_grid = a.rho_grid;
    opts.metric = metric;
    opts.pairs_budget = a.pairs_budget;
    opts.seed = a.seed;
    opts.threads = ctx.threads;
    const SweepResult r = distance_sweep(ctx.dataset, opts);
    const std::string name = metrics.size() == 1 ? "sweep.csv" : "sweep_" + to_string(metric) + ".csv";
    out.add(name, sweep_csv(r));
    log << "sweet_spot metric=" << to_string(metric) << " rho=" << format_double(r.sweet_spot) << "\n";
  }
  return 0;
}

int probe(const RunContext& ctx, OutputSet& out, std::ostream& log) {
  const MaskGraph g = diagnostic_graph(ctx.dataset, ctx.config.mask, ctx.config.train.probe_draws,
                                       derive_seed(ctx.config.train.seed, 0));
  const EncoderDecoder m = load_model(ctx);
  const ProbeResult r = mean_classifier_probe(m, g, ctx.dataset);
  nlohmann::json W = nlohmann::json::array();
  for (Eigen::Index y = 0; y < r.W.rows(); ++y) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < r.W.cols(); ++c) row.push_back(r.W(y, c));
    W.push_back(row);
  }
  const Eigen::MatrixXd F = image_features(m, ctx.dataset);
  out.add("probe.json", dump({{"accuracy", r.accuracy},
                              {"images", ctx.dataset.size()},
                              {"effective_rank", effective_rank(F)},
                              {"W", W}}));
  log << "probe: accuracy " << format_double(r.accuracy) << "\n";
  return 0;
}

// ---- report ----

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  std::vector<double> column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    std::vector<double> out;
    for (const auto& r : rows) out.push_back(r[static_cast<std::size_t>(it - header.begin())]);
    return out;
  }
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

Csv parse_csv(const std::string& text, const std::string& path) {
  Csv csv;
  std::stringstream ss(text);
  std::string line;
  if (!std::getline(ss, line)) throw ValidationError(kModule, "empty artifact " + path);
  csv.header = split(line);
  while (std::getline(ss, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != csv.header.size()) throw ValidationError(kModule, "ragged row in " + path);
    std::vector<double> row;
    for (const auto& c : cells) {
      try {
        row.push_back(std::stod(c));
      } catch (const std::exception&) {
        throw ValidationError(kModule, "non-numeric cell '" + c + "' in " + path);
      }
    }
    csv.rows.push_back(std::move(row));
  }
  return csv;
}

std::string series_label(const std::filesystem::path& p) {
  const auto parent = p.parent_path().filename().string();
  return parent.empty() ? p.stem().string() : parent + "/" + p.stem().string();
}

int report(const RunContext& ctx, OutputSet& out, std::ostream& log) {
  const auto& artifacts = ctx.config.artifacts;
  if (artifacts.empty()) throw ValidationError(kModule, "report needs at least one artifact (report.artifacts or --artifact)");

  LinePlot erank{"Effective rank during training", "epoch", "effective rank", {}};
  LinePlot loss{"Training loss", "epoch", "loss", {}};
  LinePlot relative{"Relative distance vs mask ratio", "rho", "intra / inter", {}};
  nlohmann::json listed = nlohmann::json::array();
  nlohmann::json headline = nlohmann::json::object();

  for (const auto& path_string : artifacts) {
    const std::filesystem::path path(path_string);
    const std::string text = read_file(path);
    const std::string label = series_label(path);
    std::string kind;
    if (path.extension() == ".csv") {
      const Csv csv = parse_csv(text, path_string);
      const auto& h = csv.header;
      if (!h.empty() && h[0] == "epoch" && std::count(h.begin(), h.end(), "loss") && std::count(h.begin(), h.end(), "erank")) {
        kind = "trace";
        if (csv.rows.empty()) throw ValidationError(kModule, "trace " + path_string + " has no rows");
        const auto epochs = csv.column("epoch");
        erank.series.push_back({label, epochs, csv.column("erank")});
        loss.series.push_back({label, epochs, csv.column("loss")});
        headline[label] = {{"final_epoch", epochs.back()},
                           {"final_loss", csv.column("loss").back()},
                           {"final_erank", csv.column("erank").back()},
                           {"final_probe_acc", csv.column("probe_acc").back()}};
      } else if (h == std::vector<std::string>{"rho", "intra", "inter", "relative"}) {
        kind = "sweep";
        const auto rho = csv.column("rho");
        const auto rel = csv.column("relative");
        relative.series.push_back({label, rho, rel});
        double best = std::numeric_limits<double>::quiet_NaN();
        double best_rel = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < rho.size(); ++i)
          if (!std::isnan(rel[i]) && rel[i] < best_rel) {
            best_rel = rel[i];
            best = rho[i];
          }
        headline[label] = {{"sweet_spot", best}, {"min_relative", best_rel}};
      }
    } else if (path.extension() == ".json") {
      const nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
      if (j.is_discarded()) throw ValidationError(kModule, "artifact " + path_string + " is not valid JSON");
      if (j.contains("entries") && j.contains("all_pass")) {
        kind = "bounds";
        headline[label] = {{"all_pass", j.at("all_pass")}, {"entries", j.at("entries").size()}};
      } else if (j.contains("accuracy")) {
        kind = "probe";
        headline[label] = {{"accuracy", j.at("accuracy")}};
      }
    }
    if (kind.empty()) throw ValidationError(kModule, "unrecognized artifact " + path_string);
    listed.push_back({{"path", path_string}, {"kind", kind}});
  }

  nlohmann::json plots = nlohmann::json::array();
  auto emit = [&](const LinePlot& plot, const std::string& name) {
    if (plot.series.empty()) return;
    out.add(name, render_svg(plot));
    plots.push_back(name);
  };
  emit(erank, "erank.svg");
  emit(loss, "loss.svg");
  emit(relative, "sweep.svg");

  const nlohmann::json summary = {{"config_hash", fnv1a_hex(ctx.resolved.dump())},
                                  {"version", UMAE_VERSION_STRING},
                                  {"artifacts", listed},
                                  {"headline", headline},
                                  {"plots", plots}};
  out.add("summary.json", dump(summary));
  log << "report: " << listed.size() << " artifact(s), " << plots.size() << " plot(s)\n";
  return 0;
}

}  // namespace

int run_command(const std::string& name, const RunContext& ctx, OutputSet& out, std::ostream& log) {
  if (name == "generate") return generate(ctx, out, log);
  if (name == "graph") return graph(ctx, out, log);
  if (name == "train") return train_command(ctx, out, log);
  if (name == "verify") return verify(ctx, out, log);
  if (name == "sweep") return sweep(ctx, out, log);
  if (name == "probe") return probe(ctx, out, log);
  if (name == "report") return report(ctx, out, log);
  throw ValidationError(kModule, "unknown subcommand '" + name + "'");
}

}  // namespace umae::lab
