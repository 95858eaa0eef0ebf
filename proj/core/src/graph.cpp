#include "umae/graph.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <unordered_map>

#include "umae/error.hpp"

namespace umae {
namespace {

constexpr const char* kModule = "graph";

class NodeIndex {
 public:
  int find_or_add(const View& v, std::vector<View>& nodes) {
    auto [it, inserted] = index_.try_emplace(view_id(v), static_cast<int>(nodes.size()));
    if (inserted) nodes.push_back(v);
    return it->second;
  }

 private:
  std::unordered_map<ViewKey, int> index_;
};

std::uint64_t edge_key(int i, int j) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(i)) << 32) |
         static_cast<std::uint32_t>(j);
}

int argmax_smallest(const Eigen::VectorXd& v) {
  int best = 0;
  for (int y = 1; y < v.size(); ++y)
    if (v[y] > v[best]) best = y;
  return best;
}

void fill_labels(MaskGraph& g) {
  const int n1 = g.n1_count();
  g.view_posteriors = Eigen::MatrixXd::Zero(n1, g.c);
  if (g.generative) {
    for (int i = 0; i < n1; ++i)
      g.view_posteriors.row(i) = g.generative->posterior(g.x1_nodes[static_cast<std::size_t>(i)]).transpose();
  } else {
    for (const auto& inc : g.incidences) g.view_posteriors(inc.i, inc.label) += inc.mass;
    for (int i = 0; i < n1; ++i) {
      const double z = g.view_posteriors.row(i).sum();
      if (z > 0.0) g.view_posteriors.row(i) /= z;
    }
  }
  g.view_labels.resize(static_cast<std::size_t>(n1));
  for (int i = 0; i < n1; ++i)
    g.view_labels[static_cast<std::size_t>(i)] = argmax_smallest(g.view_posteriors.row(i).transpose());
}

void fill_degrees(MaskGraph& g) {
  g.d1 = Eigen::VectorXd::Zero(g.n1_count());
  g.d2 = Eigen::VectorXd::Zero(g.n2_count());
  for (const auto& e : g.edges) {
    g.d1[e.i] += e.w;
    g.d2[e.j] += e.w;
  }
}

}  // namespace

double MaskGraph::total_weight() const {
  double t = 0.0;
  for (const auto& e : edges) t += e.w;
  return t;
}

MaskGraph build_mask_graph(const Dataset& ds, const MaskFamily& family) {
  if (ds.empty()) throw ValidationError(kModule, "cannot build a mask graph from an empty dataset");
  family.validate();
  if (family.n != ds.n)
    throw ValidationError(kModule, "mask family n = " + std::to_string(family.n) +
                                       " but images have " + std::to_string(ds.n) + " patches");

  MaskGraph g;
  g.n = ds.n;
  g.s = ds.s;
  g.c = ds.c;
  g.generative = ds.generative;
  NodeIndex x1_index;
  NodeIndex x2_index;
  std::unordered_map<std::uint64_t, int> edge_index;

  auto add = [&](int image, const Mask& mask, double mass) {
    const auto& img = ds.images[static_cast<std::size_t>(image)];
    auto views = split_views(img, mask);
    const int i = x1_index.find_or_add(views.x1, g.x1_nodes);
    const int j = x2_index.find_or_add(views.x2, g.x2_nodes);
    auto [it, inserted] = edge_index.try_emplace(edge_key(i, j), static_cast<int>(g.edges.size()));
    if (inserted) g.edges.push_back({i, j, 0.0});
    g.edges[static_cast<std::size_t>(it->second)].w += mass;
    g.incidences.push_back({image, img.label, i, j, mass});
  };

  const int images = static_cast<int>(ds.size());
  if (family.mode == MaskMode::Exhaustive) {
    const auto masks = enumerate_masks(family);
    const double mass = 1.0 / (static_cast<double>(images) * static_cast<double>(masks.size()));
    for (const auto& mask : masks)
      for (int image = 0; image < images; ++image) add(image, mask, mass);
  } else {
    g.exact = false;
    Rng rng(family.seed);
    const double mass = 1.0 / static_cast<double>(family.count);
    for (long t = 0; t < family.count; ++t) {
      const int image = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(images)));
      add(image, sample_mask(family, rng), mass);
    }
  }
  fill_degrees(g);
  fill_labels(g);
  return g;
}

MaskGraph transpose(const MaskGraph& g) {
  MaskGraph t;
  t.n = g.n;
  t.s = g.s;
  t.c = g.c;
  t.exact = g.exact;
  t.generative = g.generative;
  t.x1_nodes = g.x2_nodes;
  t.x2_nodes = g.x1_nodes;
  t.edges.reserve(g.edges.size());
  for (const auto& e : g.edges) t.edges.push_back({e.j, e.i, e.w});
  t.incidences.reserve(g.incidences.size());
  for (const auto& inc : g.incidences) t.incidences.push_back({inc.image, inc.label, inc.j, inc.i, inc.mass});
  fill_degrees(t);
  fill_labels(t);
  return t;
}

Eigen::SparseMatrix<double> mask_adjacency(const MaskGraph& g) {
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(g.edges.size());
  for (const auto& e : g.edges) triplets.emplace_back(e.j, e.i, e.w);
  Eigen::SparseMatrix<double> a(g.n2_count(), g.n1_count());
  a.setFromTriplets(triplets.begin(), triplets.end());
  return a;
}

Eigen::SparseMatrix<double> normalized_mask_adjacency(const MaskGraph& g) {
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(g.edges.size());
  for (const auto& e : g.edges) {
    const double d1 = g.d1[e.i];
    const double d2 = g.d2[e.j];
    if (!(d1 > 0.0 && d2 > 0.0)) throw NumericalError(kModule, "zero degree on an edge endpoint");
    triplets.emplace_back(e.j, e.i, e.w / std::sqrt(d1 * d2));
  }
  Eigen::SparseMatrix<double> a(g.n2_count(), g.n1_count());
  a.setFromTriplets(triplets.begin(), triplets.end());
  return a;
}

AugGraph build_aug_graph(const MaskGraph& g) {
  const int n1 = g.n1_count();
  if (n1 == 0) throw ValidationError(kModule, "mask graph has no unmasked views");
  if (n1 > kMaxDenseNodes)
    throw ValidationError(kModule, std::to_string(n1) + " unmasked views exceed the dense limit of " +
                                       std::to_string(kMaxDenseNodes));
  for (int j = 0; j < g.n2_count(); ++j)
    if (!(g.d2[j] > 0.0)) throw NumericalError(kModule, "masked view " + std::to_string(j) + " has zero degree");

  // A = A_M^T D2^{-1} A_M, formed as S^T S with S = D2^{-1/2} A_M.
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(g.edges.size());
  for (const auto& e : g.edges) triplets.emplace_back(e.j, e.i, e.w / std::sqrt(g.d2[e.j]));
  Eigen::SparseMatrix<double> scaled(g.n2_count(), n1);
  scaled.setFromTriplets(triplets.begin(), triplets.end());
  Eigen::SparseMatrix<double> gram = Eigen::SparseMatrix<double>(scaled.transpose()) * scaled;

  AugGraph aug;
  aug.adjacency = Eigen::MatrixXd(gram);
  aug.adjacency = 0.5 * (aug.adjacency + aug.adjacency.transpose()).eval();
  aug.degrees = g.d1;
  Eigen::VectorXd inv_sqrt(n1);
  for (int i = 0; i < n1; ++i) {
    if (!(g.d1[i] > 0.0)) throw NumericalError(kModule, "unmasked view " + std::to_string(i) + " has zero degree");
    inv_sqrt[i] = 1.0 / std::sqrt(g.d1[i]);
  }
  aug.normalized = inv_sqrt.asDiagonal() * aug.adjacency * inv_sqrt.asDiagonal();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(aug.normalized);
  if (solver.info() != Eigen::Success)
    throw NumericalError(kModule, "symmetric eigensolver failed on the augmentation graph");
  aug.eigenvalues = solver.eigenvalues().reverse();
  aug.eigenvectors = solver.eigenvectors().rowwise().reverse();
  const double lo = aug.eigenvalues[n1 - 1];
  const double hi = aug.eigenvalues[0];
  if (lo < -1e-9)
    throw NumericalError(kModule, "normalized augmentation adjacency is not PSD (eigenvalue " +
                                      std::to_string(lo) + ")");
  if (hi > 1.0 + 1e-9)
    throw NumericalError(kModule, "normalized augmentation adjacency has eigenvalue " +
                                      std::to_string(hi) + " > 1");
  return aug;
}

double residual_sum(const AugGraph& g, int k) {
  const int n1 = g.size();
  if (k < 0 || k > n1)
    throw ValidationError(kModule, "k = " + std::to_string(k) + " outside [0, " + std::to_string(n1) + "]");
  double sum = 0.0;
  for (int i = n1 - 1; i >= k; --i) sum += g.eigenvalues[i] * g.eigenvalues[i];
  return sum;
}

SpectralEmbedding spectral_embedding(const AugGraph& g, int k) {
  const int n1 = g.size();
  if (k < 1 || k > n1)
    throw ValidationError(kModule, "k = " + std::to_string(k) + " outside [1, " + std::to_string(n1) + "]");
  SpectralEmbedding emb;
  emb.k = k;
  emb.U.resize(n1, k);
  for (int i = 0; i < k; ++i) {
    double lambda = g.eigenvalues[i];
    if (lambda < 0.0) {
      emb.clamped = true;
      lambda = 0.0;
    }
    emb.U.col(i) = std::sqrt(lambda) * g.eigenvectors.col(i);
  }
  emb.residual = residual_sum(g, k);
  return emb;
}

nlohmann::json graph_to_json(const MaskGraph& g) {
  nlohmann::json j;
  auto views = [](const std::vector<View>& nodes) {
    auto arr = nlohmann::json::array();
    for (const auto& v : nodes) arr.push_back(view_to_json(v));
    return arr;
  };
  j["x1_nodes"] = views(g.x1_nodes);
  j["x2_nodes"] = views(g.x2_nodes);
  auto edges = nlohmann::json::array();
  for (const auto& e : g.edges) edges.push_back({{"i", e.i}, {"j", e.j}, {"w", e.w}});
  j["edges"] = std::move(edges);
  j["d1"] = std::vector<double>(g.d1.data(), g.d1.data() + g.d1.size());
  j["d2"] = std::vector<double>(g.d2.data(), g.d2.data() + g.d2.size());
  return j;
}

std::string spectrum_csv(const AugGraph& g) {
  std::ostringstream out;
  out << "index,eigenvalue\n";
  char buf[64];
  for (int i = 0; i < g.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%d,%.17g\n", i, g.eigenvalues[i]);
    out << buf;
  }
  return out.str();
}

}  // namespace umae
