#include "kktsolve/ordering.hpp"

#include <algorithm>
#include <set>
#include <utility>

#include "kktsolve/error.hpp"

namespace kktsolve {

namespace {

std::size_t sz(Index i) { return static_cast<std::size_t>(i); }

enum class NodeState : unsigned char { variable, element, absorbed };

}  // namespace

Permutation amd_order(const SparsityPattern& pattern) {
  if (pattern.rows() != pattern.cols()) throw DimensionError("amd_order: pattern must be square");
  const Index n = pattern.rows();

  // Adjacency of A + A^T without self loops.
  std::vector<std::vector<Index>> var_adj(sz(n));
  {
    const auto rp = pattern.row_ptr();
    const auto ci = pattern.col_idx();
    for (Index i = 0; i < n; ++i) {
      for (Index p = rp[sz(i)]; p < rp[sz(i) + 1]; ++p) {
        const Index j = ci[sz(p)];
        if (j == i) continue;
        var_adj[sz(i)].push_back(j);
        var_adj[sz(j)].push_back(i);
      }
    }
    for (auto& adj : var_adj) {
      std::sort(adj.begin(), adj.end());
      adj.erase(std::unique(adj.begin(), adj.end()), adj.end());
    }
  }

  std::vector<std::vector<Index>> elem_adj(sz(n));
  std::vector<std::vector<Index>> elem_vars(sz(n));
  std::vector<NodeState> state(sz(n), NodeState::variable);
  std::vector<Index> degree(sz(n));
  std::vector<Index> mark(sz(n), -1);
  std::vector<Index> ext(sz(n), 0);
  std::vector<Index> ext_tag(sz(n), -1);

  std::set<std::pair<Index, Index>> queue;
  for (Index i = 0; i < n; ++i) {
    degree[sz(i)] = static_cast<Index>(var_adj[sz(i)].size());
    queue.emplace(degree[sz(i)], i);
  }

  std::vector<Index> order;
  order.reserve(sz(n));
  std::vector<Index> lp;

  for (Index step = 0; step < n; ++step) {
    const Index p = queue.begin()->second;
    queue.erase(queue.begin());
    order.push_back(p);
    const Index tag = step;

    // L_p: variables reachable through p's variables and elements.
    lp.clear();
    mark[sz(p)] = tag;
    for (Index v : var_adj[sz(p)]) {
      if (state[sz(v)] == NodeState::variable && mark[sz(v)] != tag) {
        mark[sz(v)] = tag;
        lp.push_back(v);
      }
    }
    for (Index e : elem_adj[sz(p)]) {
      if (state[sz(e)] != NodeState::element) continue;
      for (Index v : elem_vars[sz(e)]) {
        if (state[sz(v)] == NodeState::variable && mark[sz(v)] != tag) {
          mark[sz(v)] = tag;
          lp.push_back(v);
        }
      }
      state[sz(e)] = NodeState::absorbed;
      std::vector<Index>().swap(elem_vars[sz(e)]);
    }
    state[sz(p)] = NodeState::element;
    std::sort(lp.begin(), lp.end());
    elem_vars[sz(p)] = lp;
    std::vector<Index>().swap(var_adj[sz(p)]);
    std::vector<Index>().swap(elem_adj[sz(p)]);

    const Index remaining = n - step - 1;
    const Index lp_size = static_cast<Index>(lp.size());

    for (Index i : lp) {
      // Edges to other members of L_p are now represented by element p.
      auto& va = var_adj[sz(i)];
      va.erase(std::remove_if(va.begin(), va.end(),
                              [&](Index v) { return state[sz(v)] != NodeState::variable || mark[sz(v)] == tag; }),
               va.end());
      auto& ea = elem_adj[sz(i)];
      ea.erase(std::remove_if(ea.begin(), ea.end(), [&](Index e) { return state[sz(e)] != NodeState::element; }),
               ea.end());

      Index d = static_cast<Index>(va.size()) + lp_size - 1;
      for (Index e : ea) {
        if (ext_tag[sz(e)] != tag) {
          auto& ev = elem_vars[sz(e)];
          ev.erase(std::remove_if(ev.begin(), ev.end(),
                                  [&](Index v) { return state[sz(v)] != NodeState::variable; }),
                   ev.end());
          Index outside = 0;
          for (Index v : ev) {
            if (mark[sz(v)] != tag) ++outside;
          }
          ext[sz(e)] = outside;
          ext_tag[sz(e)] = tag;
        }
        d += ext[sz(e)];
      }
      ea.push_back(p);
      d = std::min(d, remaining - 1);

      queue.erase({degree[sz(i)], i});
      degree[sz(i)] = d;
      queue.emplace(d, i);
    }
  }
  return Permutation(std::move(order));
}

Permutation amd_order(const CsMatrix& a) { return amd_order(a.pattern()); }

}  // namespace kktsolve
