#pragma once

#include <cstddef>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace odadjust {

using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

/// Separable polynomial link cost t(x) = sum_j c_j x^j with c_j >= 0, so the
/// cost is nonnegative and non-decreasing on x >= 0.
class CostFunction {
 public:
  explicit CostFunction(std::vector<double> coeffs);

  double operator()(double x) const;
  double derivative(double x) const;
  /// Closed-form integral from 0 to x.
  double integral(double x) const;

  std::span<const double> coefficients() const { return coeffs_; }

  friend bool operator==(const CostFunction&, const CostFunction&) = default;

 private:
  std::vector<double> coeffs_;
};

struct Link {
  std::string id;
  std::size_t tail = 0;
  std::size_t head = 0;
  CostFunction cost;

  friend bool operator==(const Link&, const Link&) = default;
};

struct Commodity {
  std::string id;
  std::size_t origin = 0;
  std::size_t destination = 0;
  double target_demand = 0.0;

  friend bool operator==(const Commodity&, const Commodity&) = default;
};

struct Observation {
  std::size_t link = 0;
  double flow = 0.0;

  friend bool operator==(const Observation&, const Observation&) = default;
};

// Raw, id-referenced description used to build a validated Network.
struct LinkSpec {
  std::string id;
  std::string from;
  std::string to;
  std::vector<double> coeffs;
};

struct CommoditySpec {
  std::string id;  // empty: assigned from the position ("1", "2", ...)
  std::string origin;
  std::string destination;
  double target = 0.0;
};

struct ObservationSpec {
  std::string link;
  double flow = 0.0;
};

struct NetworkSpec {
  std::vector<std::string> nodes;
  std::vector<LinkSpec> links;
  std::vector<CommoditySpec> commodities;
  std::vector<ObservationSpec> observations;
  double eta1 = 1.0;
  double eta2 = 1.0;
  bool allow_self_loops = false;
};

/// Validated, immutable traffic network. Node, link and commodity order equal
/// the input order and fix every vector layout used downstream.
class Network {
 public:
  explicit Network(const NetworkSpec& spec);

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t link_count() const { return links_.size(); }
  std::size_t commodity_count() const { return commodities_.size(); }

  const std::vector<std::string>& nodes() const { return nodes_; }
  const std::vector<Link>& links() const { return links_; }
  const std::vector<Commodity>& commodities() const { return commodities_; }
  /// Sorted by link index.
  const std::vector<Observation>& observations() const { return observations_; }

  double eta1() const { return eta1_; }
  double eta2() const { return eta2_; }

  std::optional<std::size_t> node_index(std::string_view id) const;
  std::optional<std::size_t> link_index(std::string_view id) const;

  /// Target demand vector (one entry per commodity).
  Vector target_demand() const;
  /// t(v), componentwise.
  Vector link_times(const Vector& v) const;
  /// t'(v), componentwise.
  Vector link_time_derivatives(const Vector& v) const;

  friend bool operator==(const Network& a, const Network& b) {
    return a.nodes_ == b.nodes_ && a.links_ == b.links_ &&
           a.commodities_ == b.commodities_ && a.observations_ == b.observations_ &&
           a.eta1_ == b.eta1_ && a.eta2_ == b.eta2_;
  }

 private:
  std::vector<std::string> nodes_;
  std::vector<Link> links_;
  std::vector<Commodity> commodities_;
  std::vector<Observation> observations_;
  double eta1_;
  double eta2_;
  std::unordered_map<std::string, std::size_t> node_lookup_;
  std::unordered_map<std::string, std::size_t> link_lookup_;
};

/// Parses the JSON network document (keys nodes, links, commodities,
/// observations, weights; an optional solver section is ignored here).
Network parse_network(std::string_view text);
Network parse_network(std::istream& in);
/// Reads and parses a file; MalformedInput names the path on I/O failure.
Network load_network(const std::string& path);
/// Emits a document that parse_network maps back to an equal Network.
std::string serialize_network(const Network& net);

/// Block matrices of the node-arc formulation. X and beta are laid out
/// commodity-major (all links of commodity 1, then commodity 2, ...), alpha
/// commodity-major over nodes.
struct StructureMatrices {
  SparseMatrix A;      // |N| x |A|, -1 at tail, +1 at head
  SparseMatrix Gamma;  // |C||N| x |C|, block-diagonal of gamma^i
  SparseMatrix M;      // |C||N| x |C||A|, block-diagonal of A
  SparseMatrix R;      // |A| x |C||A|, [I I ... I]
};

StructureMatrices build_structure(const Network& net);

/// v = R X. Throws DimensionMismatch if X is not |C||A| long.
Vector aggregate_flows(const StructureMatrices& S, const Vector& X);

}  // namespace odadjust
