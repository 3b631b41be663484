#ifndef XDRE_GRAPH_ENTITY_GRAPH_HPP_
#define XDRE_GRAPH_ENTITY_GRAPH_HPP_

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "xdre/ad/ops.hpp"
#include "xdre/data/types.hpp"

namespace xdre::graph {

enum class RoleKind { TargetHead, TargetTail, Bridge, NonBridge };

inline const char* role_name(RoleKind r) {
  switch (r) {
    case RoleKind::TargetHead: return "target_head";
    case RoleKind::TargetTail: return "target_tail";
    case RoleKind::Bridge: return "bridge";
    case RoleKind::NonBridge: return "non_bridge";
  }
  return "?";
}

struct NodeRole {
  RoleKind kind = RoleKind::NonBridge;
  int path = -1;  // only for target roles

  bool is_target() const { return kind == RoleKind::TargetHead || kind == RoleKind::TargetTail; }
  bool operator==(const NodeRole&) const = default;
};

enum class EdgeKind { Cooccurrence, SemanticRelated };

struct GraphEdge {
  int a = 0;  // a < b
  int b = 0;
  EdgeKind kind = EdgeKind::Cooccurrence;

  auto key() const { return std::tie(a, b, kind); }
  bool operator<(const GraphEdge& o) const { return key() < o.key(); }
  bool operator==(const GraphEdge& o) const { return key() == o.key(); }
};

template <class S>
struct GraphNode {
  int id = 0;
  std::string entity;
  NodeRole role;
  std::vector<int> paths;  // paths whose representation feeds init_state
  int mention_count = 0;
  ad::Matrix<S> init_state;  // 1 x hidden_dim
};

template <class S>
struct EntityGraph {
  std::vector<GraphNode<S>> nodes;
  std::vector<GraphEdge> edges;  // sorted, unique
  std::vector<std::set<int>> adjacency;
  int path_count = 0;

  int size() const { return static_cast<int>(nodes.size()); }

  int find_target(RoleKind kind, int path) const {
    for (const auto& n : nodes) {
      if (n.role.kind == kind && n.role.path == path) return n.id;
    }
    return -1;
  }
  int target_head(int path) const { return find_target(RoleKind::TargetHead, path); }
  int target_tail(int path) const { return find_target(RoleKind::TargetTail, path); }

  std::vector<int> non_target_ids() const {
    std::vector<int> out;
    for (const auto& n : nodes) {
      if (!n.role.is_target()) out.push_back(n.id);
    }
    return out;
  }

  ad::Matrix<S> adjacency_matrix() const {
    ad::Matrix<S> a = ad::Matrix<S>::Zero(size(), size());
    for (const auto& e : edges) {
      a(e.a, e.b) = S(1);
      a(e.b, e.a) = S(1);
    }
    return a;
  }

  ad::Matrix<S> init_matrix() const {
    if (nodes.empty()) return {};
    ad::Matrix<S> m(size(), nodes.front().init_state.cols());
    for (const auto& n : nodes) m.row(n.id) = n.init_state.row(0);
    return m;
  }

  std::size_t count(EdgeKind kind) const {
    return static_cast<std::size_t>(std::count_if(edges.begin(), edges.end(), [kind](const GraphEdge& e) { return e.kind == kind; }));
  }

  /// Subgraph without `removed` node ids; survivors are renumbered in order.
  EntityGraph without(const std::set<int>& removed) const {
    EntityGraph out;
    out.path_count = path_count;
    std::vector<int> remap(nodes.size(), -1);
    for (const auto& n : nodes) {
      if (removed.count(n.id)) {
        if (n.role.is_target()) throw std::invalid_argument("target nodes cannot be removed from the entity graph");
        continue;
      }
      remap[static_cast<std::size_t>(n.id)] = static_cast<int>(out.nodes.size());
      GraphNode<S> copy = n;
      copy.id = static_cast<int>(out.nodes.size());
      out.nodes.push_back(std::move(copy));
    }
    for (const auto& e : edges) {
      const int a = remap[static_cast<std::size_t>(e.a)];
      const int b = remap[static_cast<std::size_t>(e.b)];
      if (a >= 0 && b >= 0) out.edges.push_back({a, b, e.kind});
    }
    out.rebuild_adjacency();
    return out;
  }

  void rebuild_adjacency() {
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    adjacency.assign(nodes.size(), {});
    for (const auto& e : edges) {
      adjacency[static_cast<std::size_t>(e.a)].insert(e.b);
      adjacency[static_cast<std::size_t>(e.b)].insert(e.a);
    }
  }
};

struct GraphConfig {
  double eta = 0.6;
  int node_budget = 64;
  bool semantic_edges = true;
  bool cross_path_semantic_edges = true;
  bool include_non_bridge = true;
};

/// Role of every entity in the bag. Targets map to TargetHead/TargetTail
/// (one node per path later); any other entity is a Bridge iff some path
/// mentions it in both its head and tail document.
inline std::map<std::string, RoleKind> classify_roles(const data::DocumentBag& bag) {
  std::map<std::string, RoleKind> roles;
  roles[bag.head] = RoleKind::TargetHead;
  roles[bag.tail] = RoleKind::TargetTail;
  for (const auto& p : bag.paths) {
    const auto in_head = p.head_doc.entities();
    const auto in_tail = p.tail_doc.entities();
    for (const auto* side : {&in_head, &in_tail}) {
      for (const auto& e : *side) {
        if (e == bag.head || e == bag.tail) continue;
        const bool both = in_head.count(e) && in_tail.count(e);
        auto it = roles.find(e);
        if (it == roles.end()) {
          roles.emplace(e, both ? RoleKind::Bridge : RoleKind::NonBridge);
        } else if (both) {
          it->second = RoleKind::Bridge;
        }
      }
    }
  }
  return roles;
}

/// Cosine similarity; 0 when either vector is zero (with a warning).
template <class S>
S cosine(const ad::Matrix<S>& u, const ad::Matrix<S>& v, std::vector<std::string>* warnings = nullptr) {
  using std::sqrt;
  if (u.size() != v.size()) throw std::invalid_argument("cosine: dimension mismatch");
  const S nu = u.squaredNorm();
  const S nv = v.squaredNorm();
  if (nu == S(0) || nv == S(0)) {
    if (warnings) warnings->push_back("cosine similarity with a zero vector treated as 0");
    return S(0);
  }
  const S dot = (u.array() * v.array()).sum();
  const S c = dot / (sqrt(nu) * sqrt(nv));
  return std::clamp(c, S(-1), S(1));
}

/// Per-path entity representations: reprs[k][entity] is a 1 x d row.
template <class S>
using PathReprs = std::vector<std::map<std::string, ad::Matrix<S>>>;

template <class S>
EntityGraph<S> build_graph(const data::DocumentBag& bag, const PathReprs<S>& reprs, const GraphConfig& cfg = {},
                           std::vector<std::string>* warnings = nullptr) {
  const int n_paths = static_cast<int>(bag.paths.size());
  if (static_cast<int>(reprs.size()) != n_paths) throw std::invalid_argument("build_graph: one representation map per path required");
  auto repr_of = [&](const std::string& entity, int k) -> const ad::Matrix<S>& {
    auto it = reprs[static_cast<std::size_t>(k)].find(entity);
    if (it == reprs[static_cast<std::size_t>(k)].end()) {
      throw std::invalid_argument("build_graph: missing representation for entity '" + entity + "' in path " + std::to_string(k));
    }
    return it->second;
  };

  const auto roles = classify_roles(bag);
  struct Candidate {
    std::string entity;
    RoleKind kind;
    std::vector<int> paths;
    int mentions = 0;
  };
  std::map<std::string, Candidate> cands;
  for (int k = 0; k < n_paths; ++k) {
    for (const auto* doc : {&bag.paths[static_cast<std::size_t>(k)].head_doc, &bag.paths[static_cast<std::size_t>(k)].tail_doc}) {
      for (const auto& m : doc->mentions) {
        if (m.entity == bag.head || m.entity == bag.tail) continue;
        auto& c = cands[m.entity];
        c.entity = m.entity;
        c.kind = roles.at(m.entity);
        c.mentions += 1;
        if (c.paths.empty() || c.paths.back() != k) c.paths.push_back(k);
      }
    }
  }
  if (!cfg.include_non_bridge) {
    for (auto it = cands.begin(); it != cands.end();) {
      it = it->second.kind == RoleKind::NonBridge ? cands.erase(it) : std::next(it);
    }
  }

  const int targets = 2 * n_paths;
  if (targets > cfg.node_budget) {
    throw std::invalid_argument("build_graph: node budget " + std::to_string(cfg.node_budget) + " cannot hold the " +
                                std::to_string(targets) + " target nodes of this bag");
  }
  // Over budget: drop non-bridge entities with the fewest mentions first,
  // then bridges by the same rule; ties by ascending entity id.
  for (RoleKind kind : {RoleKind::NonBridge, RoleKind::Bridge}) {
    while (targets + static_cast<int>(cands.size()) > cfg.node_budget) {
      const Candidate* victim = nullptr;
      for (const auto& [id, c] : cands) {
        if (c.kind != kind) continue;
        if (!victim || c.mentions < victim->mentions) victim = &c;
      }
      if (!victim) break;
      const std::string dropped = victim->entity;
      if (warnings) warnings->push_back("node budget: dropped entity '" + dropped + "'");
      cands.erase(dropped);
    }
  }

  EntityGraph<S> g;
  g.path_count = n_paths;
  auto count_mentions = [&](const std::string& entity, int k) {
    int n = 0;
    for (const auto* doc : {&bag.paths[static_cast<std::size_t>(k)].head_doc, &bag.paths[static_cast<std::size_t>(k)].tail_doc}) {
      for (const auto& m : doc->mentions) n += m.entity == entity ? 1 : 0;
    }
    return n;
  };
  for (int k = 0; k < n_paths; ++k) {
    for (RoleKind kind : {RoleKind::TargetHead, RoleKind::TargetTail}) {
      const std::string& entity = kind == RoleKind::TargetHead ? bag.head : bag.tail;
      GraphNode<S> n;
      n.id = g.size();
      n.entity = entity;
      n.role = NodeRole{kind, k};
      n.paths = {k};
      n.mention_count = count_mentions(entity, k);
      n.init_state = repr_of(entity, k);
      g.nodes.push_back(std::move(n));
    }
  }
  for (const auto& [id, c] : cands) {
    GraphNode<S> n;
    n.id = g.size();
    n.entity = id;
    n.role = NodeRole{c.kind, -1};
    n.paths = c.paths;
    n.mention_count = c.mentions;
    ad::Matrix<S> stacked(static_cast<Eigen::Index>(c.paths.size()), repr_of(id, c.paths.front()).cols());
    for (std::size_t i = 0; i < c.paths.size(); ++i) stacked.row(static_cast<Eigen::Index>(i)) = repr_of(id, c.paths[i]).row(0);
    n.init_state = ad::logsumexp_rows_value(stacked);
    g.nodes.push_back(std::move(n));
  }

  // Co-occurrence: target of path k with every non-target sharing a document
  // of path k in which the target entity is mentioned.
  for (const auto& t : g.nodes) {
    if (!t.role.is_target()) continue;
    const auto& path = bag.paths[static_cast<std::size_t>(t.role.path)];
    for (const auto* doc : {&path.head_doc, &path.tail_doc}) {
      if (!doc->mentions_entity(t.entity)) continue;
      const auto ents = doc->entities();
      for (const auto& v : g.nodes) {
        if (v.role.is_target()) continue;
        if (ents.count(v.entity)) g.edges.push_back({std::min(t.id, v.id), std::max(t.id, v.id), EdgeKind::Cooccurrence});
      }
    }
  }
  if (cfg.semantic_edges) {
    const auto nt = g.non_target_ids();
    for (std::size_t i = 0; i < nt.size(); ++i) {
      for (std::size_t j = i + 1; j < nt.size(); ++j) {
        const auto& u = g.nodes[static_cast<std::size_t>(nt[i])];
        const auto& v = g.nodes[static_cast<std::size_t>(nt[j])];
        if (!cfg.cross_path_semantic_edges) {
          std::vector<int> shared;
          std::set_intersection(u.paths.begin(), u.paths.end(), v.paths.begin(), v.paths.end(), std::back_inserter(shared));
          if (shared.empty()) continue;
        }
        if (cosine(u.init_state, v.init_state, warnings) > static_cast<S>(cfg.eta)) {
          g.edges.push_back({u.id, v.id, EdgeKind::SemanticRelated});
        }
      }
    }
  }
  g.rebuild_adjacency();
  return g;
}

}  // namespace xdre::graph

#endif  // XDRE_GRAPH_ENTITY_GRAPH_HPP_
