#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <memory>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "umae/dataset.hpp"
#include "umae/masking.hpp"
#include "umae/view.hpp"

namespace umae {

/// Weighted edge between unmasked view i (in X1) and masked view j (in X2).
struct Edge {
  int i = 0;
  int j = 0;
  double w = 0.0;
};

/// One (image, mask) draw and the nodes it landed on.
struct Incidence {
  int image = 0;
  int label = 0;
  int i = 0;
  int j = 0;
  double mass = 0.0;
};

/// Bipartite mask graph between the unmasked views X1 and masked views X2,
/// weighted by the joint probability of the two views.
struct MaskGraph {
  int n = 0;
  int s = 0;
  int c = 0;
  bool exact = true;
  std::vector<View> x1_nodes;
  std::vector<View> x2_nodes;
  std::vector<Edge> edges;
  Eigen::VectorXd d1;
  Eigen::VectorXd d2;
  /// Class distribution per X1 node (N1 x c) and its argmax, ties to the smallest class.
  Eigen::MatrixXd view_posteriors;
  std::vector<int> view_labels;
  std::vector<Incidence> incidences;
  std::shared_ptr<const GenerativeModel> generative;

  int n1_count() const { return static_cast<int>(x1_nodes.size()); }
  int n2_count() const { return static_cast<int>(x2_nodes.size()); }
  double total_weight() const;
};

/// Merges the complementary views of every (image, mask) draw into a mask
/// graph. Nodes are numbered by first appearance, iterating masks in the
/// outer loop and images in the inner loop.
MaskGraph build_mask_graph(const Dataset& ds, const MaskFamily& family);

/// The same graph with the roles of X1 and X2 exchanged, so the builders
/// below yield the augmentation graph on the masked views.
MaskGraph transpose(const MaskGraph& g);

/// A_M as an N2 x N1 sparse matrix.
Eigen::SparseMatrix<double> mask_adjacency(const MaskGraph& g);

/// D2^{-1/2} A_M D1^{-1/2}.
Eigen::SparseMatrix<double> normalized_mask_adjacency(const MaskGraph& g);

inline constexpr int kMaxDenseNodes = 5000;

/// Augmentation graph on X1: A(i,i') = sum_j w(i,j) w(i',j) / d2[j], its
/// normalization by D1 and the full spectrum of the normalized matrix.
struct AugGraph {
  Eigen::MatrixXd adjacency;
  Eigen::VectorXd degrees;
  Eigen::MatrixXd normalized;
  Eigen::VectorXd eigenvalues;   // descending
  Eigen::MatrixXd eigenvectors;  // column i pairs with eigenvalues[i]

  int size() const { return static_cast<int>(degrees.size()); }
};

AugGraph build_aug_graph(const MaskGraph& g);

/// Sum of squared eigenvalues beyond the top k.
double residual_sum(const AugGraph& g, int k);

struct SpectralEmbedding {
  int k = 0;
  Eigen::MatrixXd U;  // column i = sqrt(lambda_i) u_i
  double residual = 0.0;
  bool clamped = false;  // a slightly negative eigenvalue was clamped to 0
};

/// Eckart-Young optimum of ||Abar - U U^T||_F^2 over rank-k U.
SpectralEmbedding spectral_embedding(const AugGraph& g, int k);

nlohmann::json graph_to_json(const MaskGraph& g);
/// CSV with header "index,eigenvalue".
std::string spectrum_csv(const AugGraph& g);

}  // namespace umae
