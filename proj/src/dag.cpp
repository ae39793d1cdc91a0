#include "lcausal/dag.hpp"

#include <algorithm>
#include <cstdint>
#include <deque>
#include <sstream>

#include "lcausal/error.hpp"

namespace lcausal {

CausalDag::CausalDag(std::vector<std::string> nodes, std::vector<std::pair<std::string, std::string>> edges,
                     NodeSet latent, NodeSet selected)
    : nodes_(std::move(nodes)), edges_(std::move(edges)), latent_(std::move(latent)), selected_(std::move(selected))
{
    if (nodes_.size() > max_nodes) {
        throw InputError("graph has " + std::to_string(nodes_.size()) + " nodes; at most " +
                         std::to_string(max_nodes) + " are supported");
    }
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (nodes_[i].empty()) throw InputError("node names must be nonempty");
        for (std::size_t j = 0; j < i; ++j) {
            if (nodes_[i] == nodes_[j]) throw InputError("duplicate node '" + nodes_[i] + "'");
        }
    }
    parents_.assign(nodes_.size(), {});
    children_.assign(nodes_.size(), {});
    for (const auto& [from, to] : edges_) {
        if (!has(from)) throw InputError("edge endpoint '" + from + "' is not a declared node");
        if (!has(to)) throw InputError("edge endpoint '" + to + "' is not a declared node");
        if (from == to) throw InputError("self-loop on '" + from + "'");
        const auto a = index(from);
        const auto b = index(to);
        if (std::find(children_[a].begin(), children_[a].end(), b) != children_[a].end()) {
            throw InputError("duplicate edge " + from + " -> " + to);
        }
        children_[a].push_back(b);
        parents_[b].push_back(a);
    }
    for (const auto& n : latent_) {
        if (!has(n)) throw InputError("latent mark on unknown node '" + n + "'");
    }
    for (const auto& n : selected_) {
        if (!has(n)) throw InputError("selection mark on unknown node '" + n + "'");
    }
    if (topological_order().size() != nodes_.size()) throw InputError("graph contains a cycle");
}

namespace {

std::string strip(const std::string& s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> words(const std::string& s)
{
    std::istringstream in(s);
    std::vector<std::string> out;
    std::string w;
    while (in >> w) out.push_back(w);
    return out;
}

}  // namespace

CausalDag CausalDag::parse(std::string_view text)
{
    std::vector<std::string> nodes;
    std::vector<std::pair<std::string, std::string>> edges;
    NodeSet latent;
    NodeSet selected;
    auto declare = [&](const std::string& n) {
        if (std::find(nodes.begin(), nodes.end(), n) == nodes.end()) nodes.push_back(n);
    };

    std::istringstream in{std::string(text)};
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = strip(line);
        if (line.empty()) continue;
        if (line.find("->") != std::string::npos) {
            std::vector<std::string> chain;
            std::size_t pos = 0;
            while (true) {
                const auto arrow = line.find("->", pos);
                chain.push_back(strip(line.substr(pos, arrow == std::string::npos ? std::string::npos : arrow - pos)));
                if (arrow == std::string::npos) break;
                pos = arrow + 2;
            }
            for (const auto& n : chain) {
                if (n.empty() || n.find_first_of(" \t") != std::string::npos) {
                    throw InputError("bad edge on line " + std::to_string(line_no) + ": '" + line + "'");
                }
                declare(n);
            }
            for (std::size_t i = 0; i + 1 < chain.size(); ++i) edges.emplace_back(chain[i], chain[i + 1]);
            continue;
        }
        const auto w = words(line);
        if (w.size() < 2) throw InputError("cannot parse line " + std::to_string(line_no) + ": '" + line + "'");
        for (std::size_t i = 1; i < w.size(); ++i) {
            declare(w[i]);
            if (w[0] == "latent") {
                latent.insert(w[i]);
            } else if (w[0] == "selected") {
                selected.insert(w[i]);
            } else if (w[0] != "node") {
                throw InputError("unknown directive '" + w[0] + "' on line " + std::to_string(line_no));
            }
        }
    }
    return CausalDag(std::move(nodes), std::move(edges), std::move(latent), std::move(selected));
}

bool CausalDag::has(const std::string& name) const
{
    return std::find(nodes_.begin(), nodes_.end(), name) != nodes_.end();
}

std::size_t CausalDag::index(const std::string& name) const
{
    const auto it = std::find(nodes_.begin(), nodes_.end(), name);
    if (it == nodes_.end()) throw InputError("unknown node '" + name + "'");
    return static_cast<std::size_t>(it - nodes_.begin());
}

std::vector<std::string> CausalDag::topological_order() const
{
    std::vector<std::size_t> indegree(nodes_.size());
    for (std::size_t v = 0; v < nodes_.size(); ++v) indegree[v] = parents_[v].size();
    std::deque<std::size_t> ready;
    for (std::size_t v = 0; v < nodes_.size(); ++v) {
        if (indegree[v] == 0) ready.push_back(v);
    }
    std::vector<std::string> order;
    while (!ready.empty()) {
        const auto v = ready.front();
        ready.pop_front();
        order.push_back(nodes_[v]);
        for (auto c : children_[v]) {
            if (--indegree[c] == 0) ready.push_back(c);
        }
    }
    return order;
}

NodeSet CausalDag::descendants(const std::string& name) const
{
    NodeSet out;
    std::vector<std::size_t> stack{index(name)};
    while (!stack.empty()) {
        const auto v = stack.back();
        stack.pop_back();
        for (auto c : children_[v]) {
            if (out.insert(nodes_[c]).second) stack.push_back(c);
        }
    }
    return out;
}

NodeSet CausalDag::ancestors(const std::string& name) const
{
    NodeSet out;
    std::vector<std::size_t> stack{index(name)};
    while (!stack.empty()) {
        const auto v = stack.back();
        stack.pop_back();
        for (auto p : parents_[v]) {
            if (out.insert(nodes_[p]).second) stack.push_back(p);
        }
    }
    return out;
}

CausalDag CausalDag::without_outgoing(const std::string& name) const
{
    index(name);
    auto edges = edges_;
    std::erase_if(edges, [&](const auto& e) { return e.first == name; });
    return CausalDag(nodes_, std::move(edges), latent_, selected_);
}

CausalDag CausalDag::without_incoming(const std::string& name) const
{
    index(name);
    auto edges = edges_;
    std::erase_if(edges, [&](const auto& e) { return e.second == name; });
    return CausalDag(nodes_, std::move(edges), latent_, selected_);
}

std::string CausalDag::to_text() const
{
    std::string out;
    for (const auto& n : nodes_) {
        if (parents_[index(n)].empty() && children_[index(n)].empty()) out += "node " + n + "\n";
    }
    for (const auto& [a, b] : edges_) out += a + " -> " + b + "\n";
    for (const auto& n : latent_) out += "latent " + n + "\n";
    for (const auto& n : selected_) out += "selected " + n + "\n";
    return out;
}

bool d_separated(const CausalDag& g, const std::string& x, const std::string& y, const NodeSet& z)
{
    const auto xi = g.index(x);
    const auto yi = g.index(y);
    if (xi == yi) throw InputError("d-separation query needs two distinct nodes");
    if (z.contains(x) || z.contains(y)) throw InputError("query endpoints must not be in the conditioning set");

    const std::size_t n = g.nodes().size();
    std::vector<char> observed(n, 0);
    for (const auto& name : z) observed[g.index(name)] = 1;
    for (const auto& name : g.selected()) {
        if (name == x || name == y) continue;
        observed[g.index(name)] = 1;
    }

    // Nodes that are in the conditioning set or have a descendant in it.
    std::vector<char> opens_collider(n, 0);
    std::vector<std::size_t> stack;
    for (std::size_t v = 0; v < n; ++v) {
        if (observed[v]) {
            opens_collider[v] = 1;
            stack.push_back(v);
        }
    }
    while (!stack.empty()) {
        const auto v = stack.back();
        stack.pop_back();
        for (auto p : g.parents(v)) {
            if (!opens_collider[p]) {
                opens_collider[p] = 1;
                stack.push_back(p);
            }
        }
    }

    // State: (node, arrived_from_child). Arriving from a child means the
    // trail enters the node against the edge direction.
    std::vector<char> visited(2 * n, 0);
    std::deque<std::pair<std::size_t, bool>> queue{{xi, true}};
    while (!queue.empty()) {
        const auto [v, from_child] = queue.front();
        queue.pop_front();
        const std::size_t key = 2 * v + (from_child ? 1 : 0);
        if (visited[key]) continue;
        visited[key] = 1;
        if (v == yi) return false;
        if (from_child) {
            if (observed[v]) continue;
            for (auto p : g.parents(v)) queue.emplace_back(p, true);
            for (auto c : g.children(v)) queue.emplace_back(c, false);
        } else {
            if (!observed[v]) {
                for (auto c : g.children(v)) queue.emplace_back(c, false);
            }
            if (opens_collider[v]) {
                for (auto p : g.parents(v)) queue.emplace_back(p, true);
            }
        }
    }
    return true;
}

bool satisfies_backdoor(const CausalDag& g, const std::string& exposure, const std::string& outcome,
                        const NodeSet& s)
{
    const NodeSet desc = g.descendants(exposure);
    for (const auto& v : s) {
        if (desc.contains(v)) return false;
    }
    return d_separated(g.without_outgoing(exposure), exposure, outcome, s);
}

std::vector<NodeSet> backdoor_adjustment_sets(const CausalDag& g, const std::string& exposure,
                                              const std::string& outcome)
{
    g.index(exposure);
    g.index(outcome);
    if (exposure == outcome) throw InputError("exposure and outcome must differ");
    if (g.is_latent(exposure) || g.is_latent(outcome)) {
        throw InputError("exposure and outcome must be observed nodes");
    }

    const NodeSet desc = g.descendants(exposure);
    std::vector<std::string> candidates;
    for (const auto& v : g.nodes()) {
        if (v == exposure || v == outcome || desc.contains(v) || g.is_latent(v) || g.is_selected(v)) continue;
        candidates.push_back(v);
    }
    std::sort(candidates.begin(), candidates.end());

    const CausalDag cut = g.without_outgoing(exposure);
    const std::size_t k = candidates.size();
    const std::uint64_t subsets = std::uint64_t{1} << k;
    std::vector<char> valid(subsets, 0);
    for (std::uint64_t mask = 0; mask < subsets; ++mask) {
        NodeSet s;
        for (std::size_t j = 0; j < k; ++j) {
            if (mask >> j & 1U) s.insert(candidates[j]);
        }
        valid[mask] = d_separated(cut, exposure, outcome, s) ? 1 : 0;
    }

    std::vector<NodeSet> out;
    for (std::uint64_t mask = 0; mask < subsets; ++mask) {
        if (!valid[mask]) continue;
        bool minimal = true;
        for (std::size_t j = 0; j < k && minimal; ++j) {
            if ((mask >> j & 1U) && valid[mask & ~(std::uint64_t{1} << j)]) minimal = false;
        }
        if (!minimal) continue;
        NodeSet s;
        for (std::size_t j = 0; j < k; ++j) {
            if (mask >> j & 1U) s.insert(candidates[j]);
        }
        out.push_back(std::move(s));
    }
    std::sort(out.begin(), out.end(), [](const NodeSet& a, const NodeSet& b) {
        return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
    });
    return out;
}

}  // namespace lcausal
