#include "umae/train.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>

#include "umae/analysis.hpp"
#include "umae/error.hpp"
#include "umae/losses.hpp"

namespace umae {
namespace {

constexpr const char* kModule = "train";
constexpr std::uint64_t kMaxDiagnosticIncidences = 50000;

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// -sum_{i,i'} A(i,i') f_i.f_i' computed through the mask graph, without
/// forming the dense augmentation matrix.
double edge_align(const Eigen::MatrixXd& F, const MaskGraph& g) {
  Eigen::MatrixXd pooled = Eigen::MatrixXd::Zero(g.n2_count(), F.cols());
  for (const auto& e : g.edges) pooled.row(e.j) += e.w * F.row(e.i);
  double align = 0.0;
  for (int j = 0; j < g.n2_count(); ++j) align -= pooled.row(j).squaredNorm() / g.d2[j];
  return align / g.total_weight();
}

}  // namespace

void TrainConfig::validate() const {
  // Zero is allowed: a frozen run is how diagnostics of an untrained model are traced.
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw ValidationError(kModule, "learning_rate must be >= 0");
  if (epochs < 1) throw ValidationError(kModule, "epochs must be >= 1");
  if (batch_size < 1) throw ValidationError(kModule, "batch_size must be >= 1");
  if (momentum < 0.0 || momentum >= 1.0) throw ValidationError(kModule, "momentum must lie in [0, 1)");
  if (weight_decay < 0.0) throw ValidationError(kModule, "weight_decay must be >= 0");
  if (snapshot_every < 1) throw ValidationError(kModule, "snapshot_every must be >= 1");
  if (probe_draws < 1) throw ValidationError(kModule, "probe_draws must be >= 1");
  if (loss.lambda < 0.0) throw ValidationError(kModule, "lambda must be >= 0");
}

nlohmann::json train_config_to_json(const TrainConfig& c) {
  return {{"loss", to_string(c.loss.kind)},     {"lambda", c.loss.lambda},
          {"epochs", c.epochs},                 {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},   {"momentum", c.momentum},
          {"weight_decay", c.weight_decay},     {"seed", c.seed},
          {"snapshot_every", c.snapshot_every}, {"probe_draws", c.probe_draws}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  try {
    TrainConfig c;
    c.loss.kind = loss_kind_from_string(j.value("loss", to_string(c.loss.kind)));
    c.loss.lambda = j.value("lambda", c.loss.lambda);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.momentum = j.value("momentum", c.momentum);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.seed = j.value("seed", c.seed);
    c.snapshot_every = j.value("snapshot_every", c.snapshot_every);
    c.probe_draws = j.value("probe_draws", c.probe_draws);
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(kModule, std::string("malformed train config: ") + e.what());
  }
}

std::string TrainTrace::to_csv() const {
  std::string out = "epoch,loss,align_part,unif_part,erank,probe_acc\n";
  for (const auto& r : records)
    out += std::to_string(r.epoch) + "," + format_double(r.loss) + "," + format_double(r.align_part) + "," +
           format_double(r.unif_part) + "," + format_double(r.erank) + "," + format_double(r.probe_acc) + "\n";
  return out;
}

MaskGraph diagnostic_graph(const Dataset& ds, const MaskFamily& family, long probe_draws, std::uint64_t seed) {
  MaskFamily f = family;
  const std::uint64_t masks = binomial(f.n, f.n1());
  if (masks <= f.cap && masks * ds.size() <= kMaxDiagnosticIncidences) {
    f.mode = MaskMode::Exhaustive;
  } else {
    f.mode = MaskMode::Sampled;
    f.count = probe_draws;
    f.seed = seed;
  }
  return build_mask_graph(ds, f);
}

Snapshot snapshot(const EncoderDecoder& m, const Dataset& ds, const MaskGraph& g, const LossSpec& loss, int epoch) {
  Snapshot s;
  s.epoch = epoch;
  const Eigen::MatrixXd F = encoder_features(m, g);
  s.recon_part = mae_loss(m, g).value;
  s.align_part = edge_align(F, g);
  s.unif_part = unif_loss(F, node_marginal(g.d1, Marginal::Degree)).value;
  switch (loss.kind) {
    case LossKind::Mae:
      s.loss = s.recon_part;
      break;
    case LossKind::UMae:
      s.loss = s.recon_part + loss.lambda * s.unif_part;
      break;
    case LossKind::Scl:
      s.loss = 2.0 * s.align_part + s.unif_part;
      break;
  }
  const Eigen::MatrixXd images = image_features(m, ds);
  s.singular_values = singular_values(images);
  s.erank = effective_rank(images);
  s.probe_acc = mean_classifier_probe(m, g, ds).accuracy;
  if (!std::isfinite(s.loss) || !std::isfinite(s.erank))
    throw NumericalError(kModule, "non-finite diagnostics at epoch " + std::to_string(epoch));
  return s;
}

TrainResult train(const EncoderDecoder& m, const Dataset& ds, const MaskFamily& family, const TrainConfig& cfg) {
  cfg.validate();
  ds.validate();
  family.validate();
  if (ds.empty()) throw ValidationError(kModule, "cannot train on an empty dataset");
  if (m.config().n != ds.n || m.config().s != ds.s)
    throw ValidationError(kModule, "model dims (n=" + std::to_string(m.config().n) + ", s=" +
                                       std::to_string(m.config().s) + ") do not match the dataset (n=" +
                                       std::to_string(ds.n) + ", s=" + std::to_string(ds.s) + ")");
  if (family.n != ds.n) throw ValidationError(kModule, "mask family n does not match the dataset");

  TrainResult result{m, {}};
  EncoderDecoder& model = result.model;
  const MaskGraph diag = diagnostic_graph(ds, family, cfg.probe_draws, derive_seed(cfg.seed, 0));
  Rng rng(derive_seed(cfg.seed, 1));
  ViewSampler sampler(ds, family, derive_seed(cfg.seed, 2));
  ParamSet velocity = model.params().zeros_like();
  std::vector<std::size_t> order(ds.size());

  result.trace.records.push_back(snapshot(model, ds, diag, cfg.loss, 0));
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle(order, rng);
    int batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size), ++batch_index) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      Batch batch;
      for (std::size_t t = start; t < stop; ++t) {
        const Mask mask = sample_mask(family, rng);
        if (cfg.loss.kind == LossKind::Scl) {
          batch.pairs.push_back(sampler.positive_for(order[t], mask));
        } else {
          auto views = split_views(ds.images[order[t]], mask);
          batch.recon.push_back({std::move(views.x1), std::move(views.x2), 1.0});
        }
      }
      LossResult step;
      try {
        step = loss_and_gradients(model, batch, cfg.loss);
      } catch (const NumericalError& e) {
        throw NumericalError(kModule, "epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch_index) +
                                          ": " + e.what());
      }
      velocity.scale(cfg.momentum);
      velocity.axpy(1.0, step.gradients);
      model.params().scale(1.0 - cfg.learning_rate * cfg.weight_decay);
      model.params().axpy(-cfg.learning_rate, velocity);
      if (!model.params().all_finite())
        throw NumericalError(kModule, "non-finite parameters at epoch " + std::to_string(epoch) + ", batch " +
                                          std::to_string(batch_index));
    }
    if (epoch % cfg.snapshot_every == 0 || epoch == cfg.epochs)
      result.trace.records.push_back(snapshot(model, ds, diag, cfg.loss, epoch));
  }
  return result;
}

Eigen::MatrixXd spectral_solve(const AugGraph& g, int k) {
  if (k < 1 || k > g.size())
    throw ValidationError(kModule, "k = " + std::to_string(k) + " out of range [1, " + std::to_string(g.size()) + "]");
  Eigen::MatrixXd features = spectral_embedding(g, k).U;
  for (int i = 0; i < g.size(); ++i) features.row(i) /= std::sqrt(g.degrees[i]);
  return features;
}

}  // namespace umae
