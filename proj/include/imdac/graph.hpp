#pragma once

#include <algorithm>
#include <queue>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "imdac/error.hpp"

namespace imdac {

/// Undirected simple graph on nodes 1..n. Edges are stored as (min, max) pairs.
class Graph {
public:
    using Edge = std::pair<int, int>;

    Graph() = default;

    Graph(int n, const std::vector<Edge>& edges) : n_(n) {
        if (n < 1) throw Error("graph needs at least one node");
        for (auto [i, j] : edges) {
            if (i < 1 || i > n || j < 1 || j > n)
                throw Error("edge (" + std::to_string(i) + "," + std::to_string(j) + ") out of range");
            if (i == j) throw Error("self-loop on node " + std::to_string(i));
            if (!edges_.insert(normalized(i, j)).second)
                throw Error("duplicate edge (" + std::to_string(i) + "," + std::to_string(j) + ")");
        }
    }

    int size() const noexcept { return n_; }
    const std::set<Edge>& edges() const noexcept { return edges_; }
    bool has_edge(int i, int j) const { return edges_.count(normalized(i, j)) > 0; }

    /// Neighbours of node i (1-based), ascending.
    std::vector<int> neighbors(int i) const {
        std::vector<int> out;
        for (auto [a, b] : edges_) {
            if (a == i) out.push_back(b);
            if (b == i) out.push_back(a);
        }
        std::sort(out.begin(), out.end());
        return out;
    }

    friend bool operator==(const Graph&, const Graph&) = default;

private:
    static Edge normalized(int i, int j) { return {std::min(i, j), std::max(i, j)}; }

    int n_ = 0;
    std::set<Edge> edges_;
};

struct Laplacian {
    Eigen::MatrixXd L;
    Eigen::VectorXd eigenvalues;  // ascending
};

inline Laplacian laplacian(const Graph& g) {
    const int n = g.size();
    Eigen::MatrixXi Li = Eigen::MatrixXi::Zero(n, n);
    for (auto [i, j] : g.edges()) {
        Li(i - 1, i - 1) += 1;
        Li(j - 1, j - 1) += 1;
        Li(i - 1, j - 1) -= 1;
        Li(j - 1, i - 1) -= 1;
    }
    Laplacian out;
    out.L = Li.cast<double>();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(out.L, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw Error("Laplacian eigenvalue iteration did not converge");
    out.eigenvalues = es.eigenvalues();
    return out;
}

/// Connected components by BFS, each sorted, ordered by smallest member.
inline std::vector<std::vector<int>> components(const Graph& g) {
    const int n = g.size();
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(n + 1));
    for (auto [i, j] : g.edges()) {
        adj[static_cast<std::size_t>(i)].push_back(j);
        adj[static_cast<std::size_t>(j)].push_back(i);
    }
    std::vector<bool> seen(static_cast<std::size_t>(n + 1), false);
    std::vector<std::vector<int>> out;
    for (int start = 1; start <= n; ++start) {
        if (seen[static_cast<std::size_t>(start)]) continue;
        std::vector<int> comp;
        std::queue<int> q;
        q.push(start);
        seen[static_cast<std::size_t>(start)] = true;
        while (!q.empty()) {
            const int v = q.front();
            q.pop();
            comp.push_back(v);
            for (int w : adj[static_cast<std::size_t>(v)]) {
                if (!seen[static_cast<std::size_t>(w)]) {
                    seen[static_cast<std::size_t>(w)] = true;
                    q.push(w);
                }
            }
        }
        std::sort(comp.begin(), comp.end());
        out.push_back(std::move(comp));
    }
    return out;
}

inline Graph remove_edge(const Graph& g, int i, int j) {
    if (!g.has_edge(i, j))
        throw Error("edge not present: (" + std::to_string(i) + "," + std::to_string(j) + ")");
    std::vector<Graph::Edge> kept;
    for (const auto& e : g.edges())
        if (e != std::pair{std::min(i, j), std::max(i, j)}) kept.push_back(e);
    return Graph(g.size(), kept);
}

/// Stand-in for the 9-node evaluation topology: connected, contains link 1-2,
/// and removing 3-6 leaves components {1,2,3,4,5,7} and {6,8,9}.
inline Graph reference_graph() {
    return Graph(9, {{1, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 7}, {7, 1}, {3, 6}, {6, 8}, {8, 9}, {9, 6}});
}

}  // namespace imdac
