#include "routesig/scenario.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include <json.hpp>

namespace routesig {

double LatencyPolynomial::eval(double f) const {
  double v = 0.0;
  for (int d = degree(); d >= 0; --d) v = v * f + coeffs[d];
  return v;
}

double LatencyPolynomial::deriv(double f) const {
  double v = 0.0;
  for (int d = degree(); d >= 1; --d) v = v * f + d * coeffs[d];
  return v;
}

double LatencyPolynomial::antideriv(double f) const {
  double v = 0.0;
  for (int d = degree(); d >= 0; --d) v = v * f + coeffs[d] / (d + 1);
  return v * f;
}

int RoutingScenario::max_degree() const {
  int deg = 0;
  for (const auto& row : latency)
    for (const auto& poly : row) deg = std::max(deg, poly.degree());
  return deg;
}

bool RoutingScenario::is_parallel() const {
  if (num_routes() != num_links()) return false;
  for (int i = 0; i < num_routes(); ++i)
    if (routes[i].size() != 1 || routes[i][0] != i) return false;
  return true;
}

Eigen::VectorXd RoutingScenario::link_flows(const Eigen::VectorXd& route_flow) const {
  if (route_flow.size() != num_routes())
    throw std::runtime_error("link_flows: route flow has wrong dimension");
  return incidence_ * route_flow;
}

Eigen::VectorXd RoutingScenario::route_latency(int state,
                                               const Eigen::VectorXd& aggregate) const {
  return route_latency_from_links(state, link_flows(aggregate));
}

Eigen::VectorXd RoutingScenario::route_latency(const std::string& state,
                                               const Eigen::VectorXd& aggregate) const {
  for (int w = 0; w < num_states(); ++w)
    if (states[w] == state) return route_latency(w, aggregate);
  throw std::runtime_error("route_latency: unknown state '" + state + "'");
}

Eigen::VectorXd RoutingScenario::route_latency_from_links(
    int state, const Eigen::VectorXd& link_flow) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(num_routes());
  for (int i = 0; i < num_routes(); ++i)
    for (int e : routes[i]) out[i] += latency[state][e].eval(link_flow[e]);
  return out;
}

double RoutingScenario::potential(int state, const Eigen::VectorXd& aggregate) const {
  const Eigen::VectorXd lf = link_flows(aggregate);
  double v = 0.0;
  for (int e = 0; e < num_links(); ++e) v += latency[state][e].antideriv(lf[e]);
  return v;
}

void RoutingScenario::finalize() {
  incidence_ = Eigen::MatrixXd::Zero(num_links(), num_routes());
  for (int i = 0; i < num_routes(); ++i)
    for (int e : routes[i]) incidence_(e, i) = 1.0;
  validate();
}

void RoutingScenario::validate() const {
  const int s = num_states();
  const int n = num_routes();
  if (s < 1) throw std::runtime_error("validation error: no states");
  if (n < 2) throw std::runtime_error("validation error: fewer than two routes");
  if (prior.size() != s) throw std::runtime_error("validation error: prior size mismatch");
  for (int w = 0; w < s; ++w)
    if (!(prior[w] > 0.0))
      throw std::runtime_error("validation error: prior not interior");
  if (std::abs(prior.sum() - 1.0) > 1e-12)
    throw std::runtime_error("validation error: prior does not sum to 1");
  if (!(demand > 0.0)) throw std::runtime_error("validation error: demand not positive");

  std::set<int> used;
  for (const auto& r : routes) {
    if (r.empty()) throw std::runtime_error("validation error: empty route");
    std::set<int> in_route;
    for (int e : r) {
      if (e < 0 || e >= num_links())
        throw std::runtime_error("validation error: route references unknown link");
      if (!in_route.insert(e).second)
        throw std::runtime_error("validation error: duplicate link in route");
      used.insert(e);
    }
  }
  for (int e = 0; e < num_links(); ++e)
    if (!used.count(e))
      throw std::runtime_error("validation error: link '" + links[e] +
                               "' appears in no route");

  if (static_cast<int>(latency.size()) != s)
    throw std::runtime_error("validation error: latency table state count mismatch");
  for (int w = 0; w < s; ++w) {
    if (static_cast<int>(latency[w].size()) != num_links())
      throw std::runtime_error("validation error: latency table link count mismatch");
    for (const auto& poly : latency[w]) {
      if (poly.coeffs.size() == 0)
        throw std::runtime_error("validation error: empty latency polynomial");
      for (int d = 0; d <= poly.degree(); ++d) {
        double a = poly.coeffs[d];
        if (!std::isfinite(a))
          throw std::runtime_error("validation error: non-finite latency coefficient");
        if (a < 0.0)
          throw std::runtime_error("validation error: non-monotone latency");
      }
    }
  }
}

namespace {

// FNV-1a over the raw document, rendered as 16 hex digits.
std::string content_digest(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

RoutingScenario parse_scenario(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("parse error: ") + e.what());
  }

  RoutingScenario sc;
  try {
    sc.states = doc.at("states").get<std::vector<std::string>>();
    auto prior = doc.at("prior").get<std::vector<double>>();
    sc.prior = Eigen::Map<Eigen::VectorXd>(prior.data(), prior.size());
    sc.links = doc.at("links").get<std::vector<std::string>>();

    std::unordered_map<std::string, int> link_index;
    for (size_t e = 0; e < sc.links.size(); ++e) link_index[sc.links[e]] = static_cast<int>(e);

    for (const auto& route : doc.at("routes")) {
      std::vector<int> r;
      for (const auto& name : route) {
        auto it = link_index.find(name.get<std::string>());
        if (it == link_index.end())
          throw std::runtime_error("validation error: route references unknown link");
        r.push_back(it->second);
      }
      sc.routes.push_back(std::move(r));
    }

    sc.demand = doc.at("demand").get<double>();

    const auto& lat = doc.at("latency");
    for (const auto& state : sc.states) {
      const auto& row = lat.at(state);
      std::vector<LatencyPolynomial> polys;
      for (const auto& link : sc.links) {
        auto alphas = row.at(link).get<std::vector<double>>();
        LatencyPolynomial p;
        p.coeffs = Eigen::Map<Eigen::VectorXd>(alphas.data(), alphas.size());
        polys.push_back(std::move(p));
      }
      sc.latency.push_back(std::move(polys));
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("parse error: ") + e.what());
  }

  sc.digest = content_digest(text);
  sc.finalize();
  return sc;
}

RoutingScenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("parse error: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

}  // namespace routesig
