#include <vector>

#include "odadjust/errors.hpp"
#include "odadjust/network.hpp"

namespace odadjust {

using Triplet = Eigen::Triplet<double>;

StructureMatrices build_structure(const Network& net) {
  const auto n_nodes = static_cast<Eigen::Index>(net.node_count());
  const auto n_links = static_cast<Eigen::Index>(net.link_count());
  const auto n_comm = static_cast<Eigen::Index>(net.commodity_count());

  StructureMatrices S;

  std::vector<Triplet> a_entries;
  std::vector<Triplet> m_entries;
  for (Eigen::Index a = 0; a < n_links; ++a) {
    const auto& link = net.links()[static_cast<std::size_t>(a)];
    a_entries.emplace_back(static_cast<Eigen::Index>(link.tail), a, -1.0);
    a_entries.emplace_back(static_cast<Eigen::Index>(link.head), a, 1.0);
    for (Eigen::Index i = 0; i < n_comm; ++i) {
      m_entries.emplace_back(i * n_nodes + static_cast<Eigen::Index>(link.tail), i * n_links + a, -1.0);
      m_entries.emplace_back(i * n_nodes + static_cast<Eigen::Index>(link.head), i * n_links + a, 1.0);
    }
  }
  // setFromTriplets sums duplicates, so a self-loop column comes out as zero.
  S.A.resize(n_nodes, n_links);
  S.A.setFromTriplets(a_entries.begin(), a_entries.end());
  S.M.resize(n_comm * n_nodes, n_comm * n_links);
  S.M.setFromTriplets(m_entries.begin(), m_entries.end());

  std::vector<Triplet> g_entries;
  for (Eigen::Index i = 0; i < n_comm; ++i) {
    const auto& c = net.commodities()[static_cast<std::size_t>(i)];
    g_entries.emplace_back(i * n_nodes + static_cast<Eigen::Index>(c.origin), i, -1.0);
    g_entries.emplace_back(i * n_nodes + static_cast<Eigen::Index>(c.destination), i, 1.0);
  }
  S.Gamma.resize(n_comm * n_nodes, n_comm);
  S.Gamma.setFromTriplets(g_entries.begin(), g_entries.end());

  std::vector<Triplet> r_entries;
  for (Eigen::Index i = 0; i < n_comm; ++i) {
    for (Eigen::Index a = 0; a < n_links; ++a) r_entries.emplace_back(a, i * n_links + a, 1.0);
  }
  S.R.resize(n_links, n_comm * n_links);
  S.R.setFromTriplets(r_entries.begin(), r_entries.end());

  S.A.makeCompressed();
  S.M.makeCompressed();
  S.Gamma.makeCompressed();
  S.R.makeCompressed();
  return S;
}

Vector aggregate_flows(const StructureMatrices& S, const Vector& X) {
  if (X.size() != S.R.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "disaggregated flow vector has length " +
                                                  std::to_string(X.size()) + ", expected " +
                                                  std::to_string(S.R.cols()));
  }
  return S.R * X;
}

}  // namespace odadjust
