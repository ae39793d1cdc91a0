#pragma once

#include <cstddef>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace lcausal {

using NodeSet = std::set<std::string>;

/// Causal DAG over named variables. Nodes can be marked latent
/// (unobserved) or selected (conditioned on by design, e.g. a
/// complete-records indicator). Immutable after construction.
class CausalDag {
public:
    static constexpr std::size_t max_nodes = 24;

    CausalDag(std::vector<std::string> nodes, std::vector<std::pair<std::string, std::string>> edges,
              NodeSet latent = {}, NodeSet selected = {});

    /// Text format: one `parent -> child` per line (chains `a -> b -> c`
    /// allowed), `latent X [Y ...]`, `selected R`, `node X`, `#` comments.
    static CausalDag parse(std::string_view text);

    const std::vector<std::string>& nodes() const { return nodes_; }
    const std::vector<std::pair<std::string, std::string>>& edges() const { return edges_; }
    const NodeSet& latent() const { return latent_; }
    const NodeSet& selected() const { return selected_; }

    bool has(const std::string& name) const;
    std::size_t index(const std::string& name) const;
    bool is_latent(const std::string& name) const { return latent_.contains(name); }
    bool is_selected(const std::string& name) const { return selected_.contains(name); }

    const std::vector<std::size_t>& parents(std::size_t v) const { return parents_[v]; }
    const std::vector<std::size_t>& children(std::size_t v) const { return children_[v]; }

    std::vector<std::string> topological_order() const;
    /// Strict descendants / ancestors (the node itself excluded).
    NodeSet descendants(const std::string& name) const;
    NodeSet ancestors(const std::string& name) const;

    /// Copy with every edge out of `name` removed.
    CausalDag without_outgoing(const std::string& name) const;
    /// Copy with every edge into `name` removed.
    CausalDag without_incoming(const std::string& name) const;

    std::string to_text() const;

private:
    std::vector<std::string> nodes_;
    std::vector<std::pair<std::string, std::string>> edges_;
    NodeSet latent_;
    NodeSet selected_;
    std::vector<std::vector<std::size_t>> parents_;
    std::vector<std::vector<std::size_t>> children_;
};

/// True iff every path between x and y is blocked by z (selected nodes are
/// always treated as conditioned on). Reachability ("Bayes ball") search.
bool d_separated(const CausalDag& g, const std::string& x, const std::string& y, const NodeSet& z);

/// True iff `s` contains no descendant of the exposure and blocks every
/// backdoor path from exposure to outcome.
bool satisfies_backdoor(const CausalDag& g, const std::string& exposure, const std::string& outcome,
                        const NodeSet& s);

/// Every minimal backdoor adjustment set built from observed,
/// non-descendant nodes, in lexicographic order of sorted members. An
/// empty result means no observed adjustment set exists; `{{}}` means no
/// adjustment is needed.
std::vector<NodeSet> backdoor_adjustment_sets(const CausalDag& g, const std::string& exposure,
                                              const std::string& outcome);

}  // namespace lcausal
