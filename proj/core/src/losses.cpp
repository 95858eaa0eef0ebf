#include "umae/losses.hpp"

#include <cmath>

#include "umae/error.hpp"

namespace umae {
namespace {

constexpr const char* kModule = "losses";

LossReport report(std::string name, double value, LossForm form,
                  std::vector<std::pair<std::string, double>> components = {}) {
  return {std::move(name), value, form, std::move(components)};
}

bool same_bits(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) {
  for (Eigen::Index i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

void check_samples(long samples) {
  if (samples < 1) throw ValidationError(kModule, "empirical losses need at least one sample");
}

}  // namespace

double LossReport::component(const std::string& key) const {
  for (const auto& [k, v] : components)
    if (k == key) return v;
  throw ValidationError(kModule, "loss report '" + name + "' has no component '" + key + "'");
}

nlohmann::json to_json(const LossReport& r) {
  nlohmann::json comps = nlohmann::json::object();
  for (const auto& [k, v] : r.components) comps[k] = v;
  return {{"name", r.name},
          {"value", r.value},
          {"form", r.form == LossForm::Exact ? "exact" : "empirical"},
          {"components", comps}};
}

Eigen::VectorXd node_marginal(const Eigen::VectorXd& degrees, Marginal kind) {
  if (degrees.size() == 0) throw ValidationError(kModule, "marginal over an empty node set");
  if (kind == Marginal::Uniform) return Eigen::VectorXd::Constant(degrees.size(), 1.0 / degrees.size());
  const double total = degrees.sum();
  if (!(total > 0.0)) throw ValidationError(kModule, "degrees sum to zero");
  return degrees / total;
}

Eigen::MatrixXd encoder_features(const EncoderDecoder& m, const MaskGraph& g) {
  Eigen::MatrixXd F(g.n1_count(), m.config().k);
  for (int i = 0; i < g.n1_count(); ++i) F.row(i) = m.encode(g.x1_nodes[static_cast<std::size_t>(i)]).transpose();
  return F;
}

Eigen::MatrixXd reconstructions(const EncoderDecoder& m, const MaskGraph& g) {
  const int n2 = g.n - (g.x1_nodes.empty() ? 0 : static_cast<int>(g.x1_nodes.front().size()));
  Eigen::MatrixXd H(g.n1_count(), n2 * g.s);
  for (int i = 0; i < g.n1_count(); ++i) {
    const auto& v = g.x1_nodes[static_cast<std::size_t>(i)];
    H.row(i) = m.reconstruct(v, Mask::from_kept(g.n, v.positions())).transpose();
  }
  return H;
}

Eigen::MatrixXd pseudo_outputs(const PseudoEncoder& hg, const MaskGraph& g) {
  const int width = g.x2_nodes.empty() ? 0 : static_cast<int>(g.x2_nodes.front().size()) * g.s;
  Eigen::MatrixXd T(g.n2_count(), width);
  for (int j = 0; j < g.n2_count(); ++j) T.row(j) = hg.apply(g.x2_nodes[static_cast<std::size_t>(j)]).transpose();
  return T;
}

LossReport mae_loss(const EncoderDecoder& m, const MaskGraph& g) {
  const Eigen::MatrixXd H = reconstructions(m, g);
  const Eigen::MatrixXd T = pseudo_outputs(PseudoEncoder::identity(), g);
  double value = 0.0;
  for (const auto& e : g.edges) value += e.w * (H.row(e.i) - T.row(e.j)).squaredNorm();
  return report("mae", value, LossForm::Exact);
}

LossReport asym_align_loss(const EncoderDecoder& m, const PseudoEncoder& hg, const MaskGraph& g) {
  const Eigen::MatrixXd H = reconstructions(m, g);
  const Eigen::MatrixXd Hg = pseudo_outputs(hg, g);
  double expectation = 0.0;
  for (const auto& e : g.edges) expectation -= e.w * H.row(e.i).dot(Hg.row(e.j));

  const Eigen::MatrixXd Hs = g.d1.cwiseSqrt().asDiagonal() * H;
  const Eigen::MatrixXd Hgs = g.d2.cwiseSqrt().asDiagonal() * Hg;
  const Eigen::SparseMatrix<double> abar = normalized_mask_adjacency(g);
  const Eigen::MatrixXd AH = abar * Hs;
  const double trace = -(Hgs.cwiseProduct(AH)).sum();
  if (std::abs(trace - expectation) > 1e-10)
    throw NumericalError(kModule, "asymmetric alignment: expectation form " + std::to_string(expectation) +
                                      " disagrees with trace form " + std::to_string(trace));
  return report("asym_align", expectation, LossForm::Exact,
                {{"expectation_form", expectation}, {"trace_form", trace}});
}

LossReport align_loss(const Eigen::MatrixXd& features, const AugGraph& aug) {
  if (features.rows() != aug.size()) throw ValidationError(kModule, "one feature row per node required");
  const double total = aug.adjacency.sum();
  if (!(total > 0.0)) throw ValidationError(kModule, "augmentation graph has zero total weight");
  const double value = -(aug.adjacency.cwiseProduct(features * features.transpose())).sum() / total;
  return report("align", value, LossForm::Exact);
}

LossReport unif_loss(const Eigen::MatrixXd& features, const Eigen::VectorXd& marginal) {
  if (features.rows() != marginal.size()) throw ValidationError(kModule, "one feature row per marginal entry required");
  if (std::abs(marginal.sum() - 1.0) > 1e-9 || marginal.minCoeff() < 0.0)
    throw ValidationError(kModule, "node marginal must be a probability vector");
  // sum_{i,i'} p_i p_i' (f_i.f_i')^2 = ||F^T P F||_F^2
  const Eigen::MatrixXd moment = features.transpose() * marginal.asDiagonal() * features;
  return report("unif", moment.squaredNorm(), LossForm::Exact);
}

LossReport umae_loss(const EncoderDecoder& m, const MaskGraph& g, double lambda, Marginal marginal) {
  if (lambda < 0.0) throw ValidationError(kModule, "lambda must be >= 0");
  const double mae = mae_loss(m, g).value;
  const double unif = unif_loss(encoder_features(m, g), node_marginal(g.d1, marginal)).value;
  return report("umae", mae + lambda * unif, LossForm::Exact,
                {{"mae", mae}, {"unif", unif}, {"lambda", lambda}});
}

LossReport scl_loss(const Eigen::MatrixXd& features, const AugGraph& aug, const Eigen::VectorXd& marginal) {
  const double align = align_loss(features, aug).value;
  const double unif = unif_loss(features, marginal).value;
  return report("scl", 2.0 * align + unif, LossForm::Exact, {{"align", align}, {"unif", unif}});
}

ViewSampler::ViewSampler(const Dataset& ds, const MaskFamily& family, std::uint64_t seed)
    : ds_(&ds), family_(family), rng_(seed) {
  if (ds.empty()) throw ValidationError(kModule, "sampler needs a nonempty dataset");
  family_.validate();
  if (family_.n != ds.n) throw ValidationError(kModule, "mask family does not match the dataset's n");
}

ViewPair ViewSampler::draw_pair() {
  const auto image = uniform_index(rng_, ds_->size());
  return split_views(ds_->images[image], sample_mask(family_, rng_));
}

PairSample ViewSampler::draw_positive() {
  const auto image = uniform_index(rng_, ds_->size());
  const Mask mask = sample_mask(family_, rng_);
  return positive_for(image, mask);
}

PairSample ViewSampler::positive_for(std::size_t image, const Mask& mask) {
  const auto dropped = mask.dropped_positions();
  const auto& anchor = ds_->images[image];
  std::vector<std::size_t> sharing;
  for (std::size_t other = 0; other < ds_->size(); ++other) {
    const auto& img = ds_->images[other];
    bool same = true;
    for (int p : dropped) {
      if (!same_bits(img.patches.row(p), anchor.patches.row(p))) {
        same = false;
        break;
      }
    }
    if (same) sharing.push_back(other);
  }
  const auto partner = sharing[uniform_index(rng_, sharing.size())];
  const auto kept = mask.kept_positions();
  return {view_at(anchor, kept), view_at(ds_->images[partner], kept)};
}

View ViewSampler::draw_unmasked() { return draw_pair().x1; }

LossReport mae_loss_empirical(const EncoderDecoder& m, ViewSampler& sampler, long samples) {
  check_samples(samples);
  double sum = 0.0;
  for (long t = 0; t < samples; ++t) {
    const auto pair = sampler.draw_pair();
    sum += (m.reconstruct(pair.x1, pair.x2.positions()) - normalized_target(pair.x2)).squaredNorm();
  }
  return report("mae", sum / static_cast<double>(samples), LossForm::Empirical);
}

LossReport align_loss_empirical(const FeatureFn& feat, ViewSampler& sampler, long samples) {
  check_samples(samples);
  double sum = 0.0;
  for (long t = 0; t < samples; ++t) {
    const auto pair = sampler.draw_positive();
    sum -= feat(pair.a).dot(feat(pair.b));
  }
  return report("align", sum / static_cast<double>(samples), LossForm::Empirical);
}

LossReport unif_loss_empirical(const FeatureFn& feat, ViewSampler& sampler, long samples) {
  check_samples(samples);
  double sum = 0.0;
  for (long t = 0; t < samples; ++t) {
    const double dot = feat(sampler.draw_unmasked()).dot(feat(sampler.draw_unmasked()));
    sum += dot * dot;
  }
  return report("unif", sum / static_cast<double>(samples), LossForm::Empirical);
}

LossReport scl_loss_empirical(const FeatureFn& feat, ViewSampler& sampler, long samples) {
  const double align = align_loss_empirical(feat, sampler, samples).value;
  const double unif = unif_loss_empirical(feat, sampler, samples).value;
  return report("scl", 2.0 * align + unif, LossForm::Empirical, {{"align", align}, {"unif", unif}});
}

LossReport umae_loss_empirical(const EncoderDecoder& m, ViewSampler& sampler, double lambda, long samples) {
  const double mae = mae_loss_empirical(m, sampler, samples).value;
  const double unif =
      unif_loss_empirical([&m](const View& v) { return m.encode(v); }, sampler, samples).value;
  return report("umae", mae + lambda * unif, LossForm::Empirical,
                {{"mae", mae}, {"unif", unif}, {"lambda", lambda}});
}

}  // namespace umae
