#include "odadjust/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <queue>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "odadjust/errors.hpp"

namespace odadjust {

using json = nlohmann::json;

CostFunction::CostFunction(std::vector<double> coeffs) : coeffs_(std::move(coeffs)) {
  if (coeffs_.empty()) {
    throw Error(ErrorCode::MalformedInput, "cost function needs at least one coefficient");
  }
  for (double c : coeffs_) {
    if (!std::isfinite(c)) {
      throw Error(ErrorCode::MalformedInput, "cost coefficient is not finite");
    }
    if (c < 0.0) {
      throw Error(ErrorCode::NegativeCoefficient,
                  "cost coefficient " + std::to_string(c) + " is negative");
    }
  }
}

double CostFunction::operator()(double x) const {
  double acc = 0.0;
  for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) acc = acc * x + *it;
  return acc;
}

double CostFunction::derivative(double x) const {
  double acc = 0.0;
  for (std::size_t j = coeffs_.size(); j-- > 1;) acc = acc * x + static_cast<double>(j) * coeffs_[j];
  return acc;
}

double CostFunction::integral(double x) const {
  double acc = 0.0;
  for (std::size_t j = coeffs_.size(); j-- > 0;) {
    acc = acc * x + coeffs_[j] / static_cast<double>(j + 1);
  }
  return acc * x;
}

namespace {

void require_nonnegative(double value, const std::string& what) {
  if (!std::isfinite(value) || value < 0.0) {
    throw Error(ErrorCode::MalformedInput, what + " must be a finite nonnegative number");
  }
}

std::vector<bool> reachable_from(std::size_t origin, std::size_t node_count,
                                 const std::vector<Link>& links) {
  std::vector<std::vector<std::size_t>> out(node_count);
  for (const auto& link : links) out[link.tail].push_back(link.head);
  std::vector<bool> seen(node_count, false);
  std::queue<std::size_t> frontier;
  seen[origin] = true;
  frontier.push(origin);
  while (!frontier.empty()) {
    const std::size_t u = frontier.front();
    frontier.pop();
    for (std::size_t w : out[u]) {
      if (!seen[w]) {
        seen[w] = true;
        frontier.push(w);
      }
    }
  }
  return seen;
}

}  // namespace

Network::Network(const NetworkSpec& spec) : eta1_(spec.eta1), eta2_(spec.eta2) {
  require_nonnegative(eta1_, "weight eta1");
  require_nonnegative(eta2_, "weight eta2");
  if (spec.nodes.empty()) throw Error(ErrorCode::MalformedInput, "network has no nodes");

  nodes_ = spec.nodes;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!node_lookup_.emplace(nodes_[i], i).second) {
      throw Error(ErrorCode::DuplicateId, "node '" + nodes_[i] + "' declared twice");
    }
  }

  auto resolve_node = [&](const std::string& id, const std::string& context) {
    auto it = node_lookup_.find(id);
    if (it == node_lookup_.end()) {
      throw Error(ErrorCode::DanglingReference, context + " references unknown node '" + id + "'");
    }
    return it->second;
  };

  links_.reserve(spec.links.size());
  for (const auto& ls : spec.links) {
    if (!link_lookup_.emplace(ls.id, links_.size()).second) {
      throw Error(ErrorCode::DuplicateId, "link '" + ls.id + "' declared twice");
    }
    const std::size_t tail = resolve_node(ls.from, "link '" + ls.id + "'");
    const std::size_t head = resolve_node(ls.to, "link '" + ls.id + "'");
    if (tail == head && !spec.allow_self_loops) {
      throw Error(ErrorCode::SelfLoop, "link '" + ls.id + "' is a self-loop");
    }
    links_.push_back(Link{ls.id, tail, head, CostFunction(ls.coeffs)});
  }
  if (links_.empty()) throw Error(ErrorCode::MalformedInput, "network has no links");

  std::unordered_set<std::string> commodity_ids;
  commodities_.reserve(spec.commodities.size());
  for (std::size_t i = 0; i < spec.commodities.size(); ++i) {
    const auto& cs = spec.commodities[i];
    std::string id = cs.id.empty() ? std::to_string(i + 1) : cs.id;
    if (!commodity_ids.insert(id).second) {
      throw Error(ErrorCode::DuplicateId, "commodity '" + id + "' declared twice");
    }
    const std::size_t origin = resolve_node(cs.origin, "commodity '" + id + "'");
    const std::size_t destination = resolve_node(cs.destination, "commodity '" + id + "'");
    if (origin == destination) {
      throw Error(ErrorCode::MalformedInput,
                  "commodity '" + id + "' has identical origin and destination");
    }
    require_nonnegative(cs.target, "target demand of commodity '" + id + "'");
    commodities_.push_back(Commodity{std::move(id), origin, destination, cs.target});
  }
  if (commodities_.empty()) throw Error(ErrorCode::MalformedInput, "network has no commodities");

  for (const auto& c : commodities_) {
    if (!reachable_from(c.origin, nodes_.size(), links_)[c.destination]) {
      throw Error(ErrorCode::UnreachableDestination,
                  "commodity '" + c.id + "': no path from '" + nodes_[c.origin] + "' to '" +
                      nodes_[c.destination] + "'");
    }
  }

  std::unordered_set<std::size_t> observed;
  for (const auto& os : spec.observations) {
    auto it = link_lookup_.find(os.link);
    if (it == link_lookup_.end()) {
      throw Error(ErrorCode::DanglingReference,
                  "observation references unknown link '" + os.link + "'");
    }
    if (!observed.insert(it->second).second) {
      throw Error(ErrorCode::DuplicateId, "link '" + os.link + "' observed twice");
    }
    require_nonnegative(os.flow, "observed flow on link '" + os.link + "'");
    observations_.push_back(Observation{it->second, os.flow});
  }
  std::sort(observations_.begin(), observations_.end(),
            [](const Observation& a, const Observation& b) { return a.link < b.link; });
}

std::optional<std::size_t> Network::node_index(std::string_view id) const {
  auto it = node_lookup_.find(std::string(id));
  if (it == node_lookup_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> Network::link_index(std::string_view id) const {
  auto it = link_lookup_.find(std::string(id));
  if (it == link_lookup_.end()) return std::nullopt;
  return it->second;
}

Vector Network::target_demand() const {
  Vector d(commodities_.size());
  for (std::size_t i = 0; i < commodities_.size(); ++i) d[i] = commodities_[i].target_demand;
  return d;
}

Vector Network::link_times(const Vector& v) const {
  Vector t(links_.size());
  for (std::size_t a = 0; a < links_.size(); ++a) t[a] = links_[a].cost(v[a]);
  return t;
}

Vector Network::link_time_derivatives(const Vector& v) const {
  Vector dt(links_.size());
  for (std::size_t a = 0; a < links_.size(); ++a) dt[a] = links_[a].cost.derivative(v[a]);
  return dt;
}

// ---------------------------------------------------------------------------
// JSON input

namespace {

std::string id_from_json(const json& j, const std::string& context) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number_integer() || j.is_number_unsigned()) return std::to_string(j.get<long long>());
  throw Error(ErrorCode::MalformedInput, context + ": id must be a string or an integer");
}

double number_from_json(const json& j, const std::string& context) {
  if (!j.is_number()) throw Error(ErrorCode::MalformedInput, context + " must be a number");
  return j.get<double>();
}

const json& required(const json& obj, const char* key, const std::string& context) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw Error(ErrorCode::MalformedInput, context + " is missing key '" + key + "'");
  }
  return *it;
}

const json& required_array(const json& obj, const char* key) {
  const json& value = required(obj, key, "document");
  if (!value.is_array()) throw Error(ErrorCode::MalformedInput, std::string("'") + key + "' must be an array");
  return value;
}

NetworkSpec spec_from_json(const json& doc) {
  if (!doc.is_object()) throw Error(ErrorCode::MalformedInput, "document must be a JSON object");
  NetworkSpec spec;

  for (const auto& n : required_array(doc, "nodes")) spec.nodes.push_back(id_from_json(n, "node"));

  for (const auto& l : required_array(doc, "links")) {
    if (!l.is_object()) throw Error(ErrorCode::MalformedInput, "link entries must be objects");
    LinkSpec ls;
    ls.id = id_from_json(required(l, "id", "link"), "link");
    const std::string ctx = "link '" + ls.id + "'";
    ls.from = id_from_json(required(l, "from", ctx), ctx);
    ls.to = id_from_json(required(l, "to", ctx), ctx);
    const json& coeffs = required(l, "coeffs", ctx);
    if (!coeffs.is_array()) throw Error(ErrorCode::MalformedInput, ctx + ": 'coeffs' must be an array");
    for (const auto& c : coeffs) ls.coeffs.push_back(number_from_json(c, ctx + " coefficient"));
    spec.links.push_back(std::move(ls));
  }

  for (const auto& c : required_array(doc, "commodities")) {
    if (!c.is_object()) throw Error(ErrorCode::MalformedInput, "commodity entries must be objects");
    CommoditySpec cs;
    if (auto it = c.find("id"); it != c.end()) cs.id = id_from_json(*it, "commodity");
    cs.origin = id_from_json(required(c, "origin", "commodity"), "commodity origin");
    cs.destination = id_from_json(required(c, "destination", "commodity"), "commodity destination");
    cs.target = number_from_json(required(c, "target", "commodity"), "commodity target");
    spec.commodities.push_back(std::move(cs));
  }

  if (auto it = doc.find("observations"); it != doc.end()) {
    if (!it->is_array()) throw Error(ErrorCode::MalformedInput, "'observations' must be an array");
    for (const auto& o : *it) {
      if (!o.is_object()) throw Error(ErrorCode::MalformedInput, "observation entries must be objects");
      ObservationSpec os;
      os.link = id_from_json(required(o, "link", "observation"), "observation link");
      os.flow = number_from_json(required(o, "flow", "observation"), "observed flow");
      spec.observations.push_back(std::move(os));
    }
  }

  if (auto it = doc.find("weights"); it != doc.end()) {
    if (!it->is_object()) throw Error(ErrorCode::MalformedInput, "'weights' must be an object");
    if (auto e = it->find("eta1"); e != it->end()) spec.eta1 = number_from_json(*e, "eta1");
    if (auto e = it->find("eta2"); e != it->end()) spec.eta2 = number_from_json(*e, "eta2");
  }
  if (auto it = doc.find("allow_self_loops"); it != doc.end()) {
    if (!it->is_boolean()) throw Error(ErrorCode::MalformedInput, "'allow_self_loops' must be a boolean");
    spec.allow_self_loops = it->get<bool>();
  }
  return spec;
}

}  // namespace

Network parse_network(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedInput, e.what());
  }
  return Network(spec_from_json(doc));
}

Network parse_network(std::istream& in) {
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_network(buffer.str());
}

Network load_network(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MalformedInput, "cannot open input file '" + path + "'");
  return parse_network(in);
}

std::string serialize_network(const Network& net) {
  json doc;
  doc["nodes"] = net.nodes();
  json links = json::array();
  for (const auto& link : net.links()) {
    links.push_back({{"id", link.id},
                     {"from", net.nodes()[link.tail]},
                     {"to", net.nodes()[link.head]},
                     {"coeffs", std::vector<double>(link.cost.coefficients().begin(),
                                                    link.cost.coefficients().end())}});
  }
  doc["links"] = std::move(links);
  json commodities = json::array();
  for (const auto& c : net.commodities()) {
    commodities.push_back({{"id", c.id},
                           {"origin", net.nodes()[c.origin]},
                           {"destination", net.nodes()[c.destination]},
                           {"target", c.target_demand}});
  }
  doc["commodities"] = std::move(commodities);
  json observations = json::array();
  for (const auto& o : net.observations()) {
    observations.push_back({{"link", net.links()[o.link].id}, {"flow", o.flow}});
  }
  doc["observations"] = std::move(observations);
  doc["weights"] = {{"eta1", net.eta1()}, {"eta2", net.eta2()}};
  bool has_self_loop = std::any_of(net.links().begin(), net.links().end(),
                                   [](const Link& l) { return l.tail == l.head; });
  if (has_self_loop) doc["allow_self_loops"] = true;
  return doc.dump(2);
}

}  // namespace odadjust
