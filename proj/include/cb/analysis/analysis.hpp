#pragma once

// Analysis over recorded runs: flattened run tables, slicing, virtual runs,
// stratified impact estimates on a declared factor graph, Pareto fronts,
// additive-effect predictions and coverage-driven recommendations.

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cb/core/canonical.hpp"
#include "cb/core/types.hpp"

namespace cb {

class Registry;

using Cell = std::optional<Scalar>;  // nullopt = null

enum class ColumnKind { Meta, Factor, Outcome };
std::string_view to_string(ColumnKind k);

struct Column {
    std::string name;
    ColumnKind kind = ColumnKind::Factor;

    bool operator==(const Column&) const = default;
};

struct RunTable {
    std::vector<Column> columns;
    std::vector<std::vector<Cell>> rows;

    /// Index of the named column or nullopt.
    std::optional<std::size_t> find(std::string_view name) const;
    /// Index of the named column; Error(UnknownColumn) if absent.
    std::size_t index(std::string_view name) const;
    const Cell& at(std::size_t row, std::string_view column) const { return rows[row][index(column)]; }

    bool operator==(const RunTable&) const = default;
};

// Column layout: run_id, context_id, executed_by, scenario_key, profile_hash,
// status (meta); dataset, data.<config>, model, hp.<param>, hw.<field>,
// sw.<field> (factors); acc.<metric>, timing and resource keys (outcomes).
RunTable build_table(const std::vector<BenchmarkRun>& runs,
                     const std::map<ComponentId, DatasetDescriptor>& datasets = {});

/// CSV with a header row; null cells are written as `null`.
std::string to_csv(const RunTable& table);

// Scalar helpers shared by the analysis code: numbers compare numerically
// across int/double; order is bool < number < string.
bool scalar_equal(const Scalar& a, const Scalar& b);
bool scalar_less(const Scalar& a, const Scalar& b);
bool cell_less(const Cell& a, const Cell& b);  // null first
std::string scalar_text(const Scalar& s);

// ---- slice ----

enum class FilterOp { Eq, Ne, Lt, Le, Gt, Ge, IsNull, NotNull };
enum class AggFn { Mean, Median, Min, Max, Count };

struct Filter {
    std::string column;
    FilterOp op = FilterOp::Eq;
    Scalar value;
};

struct Aggregate {
    std::string column;
    AggFn fn = AggFn::Mean;
};

/// Filter, then group (groups sorted by key), then aggregate. Each aggregate
/// yields a column `<fn>(<column>)`; every aggregated column also gets
/// `n(<column>)`, the number of non-null cells that entered it.
RunTable slice(const RunTable& table, const std::vector<Filter>& filters, const std::vector<std::string>& group_by,
               const std::vector<Aggregate>& aggregates);

// ---- virtual runs ----

struct Coverage {
    std::vector<std::string> matched;    // scenario keys with at least one result
    std::vector<std::string> unmatched;  // scenario keys nobody has executed
    std::vector<std::string> profiles;   // distinct profile hashes among matched results

    bool operator==(const Coverage&) const = default;
};

struct VirtualRun {
    RunTable table;
    Coverage coverage;
};

VirtualRun assemble_virtual_run(const std::vector<BenchmarkRun>& accessible_runs, const BenchmarkContext& context,
                                const std::map<ComponentId, DatasetDescriptor>& datasets = {});
/// Same, gathering the runs (public plus own) and dataset descriptors from a registry.
VirtualRun assemble_virtual_run(const Registry& registry, const BenchmarkContext& context, const std::string& principal);

// ---- causal graph ----

struct GraphNode {
    std::string name;
    ColumnKind kind = ColumnKind::Factor;  // Factor or Outcome
    std::vector<std::string> columns;      // table columns; a trailing `*` matches a prefix

    bool operator==(const GraphNode&) const = default;
};

class CausalGraph {
public:
    CausalGraph() = default;
    /// Throws SchemaViolation if cyclic, an edge names an undeclared node, or
    /// an outcome points at a factor.
    CausalGraph(std::vector<GraphNode> nodes, std::vector<std::pair<std::string, std::string>> edges);

    static CausalGraph from_json(const Json& j);
    Json to_json() const;
    /// The shipped default graph.
    static CausalGraph default_graph();

    const std::vector<GraphNode>& nodes() const { return nodes_; }
    const std::vector<std::pair<std::string, std::string>>& edges() const { return edges_; }
    const GraphNode& node(std::string_view name) const;  // UnknownNode
    std::vector<std::string> parents(std::string_view name) const;
    std::vector<std::string> ancestors(std::string_view name) const;

    /// Node whose column patterns cover the column; UnknownNode if none.
    const GraphNode& node_of_column(std::string_view column) const;
    /// Table columns matched by the node's patterns, in table order.
    std::vector<std::string> columns_of(const GraphNode& node, const RunTable& table) const;

private:
    std::vector<GraphNode> nodes_;
    std::vector<std::pair<std::string, std::string>> edges_;
};

// ---- impact ----

struct Contrast {
    std::string column;
    Scalar level_a;
    Scalar level_b;
};

struct StratumDetail {
    std::string stratum;
    double mean_a = 0, mean_b = 0;
    std::int64_t n_a = 0, n_b = 0;
};

struct EffectEstimate {
    Contrast treatment;
    std::string outcome;
    std::vector<std::string> adjusted_for;     // graph nodes
    std::vector<std::string> stratified_on;    // table columns
    double estimate = 0;                       // mean_a - mean_b, adjusted
    double standard_error = 0;
    double unadjusted = 0;
    std::vector<StratumDetail> strata;         // contributing strata
    std::vector<std::string> dropped_strata;   // strata lacking an arm
};

/// Stratified backdoor adjustment on parents(treatment) ∩ ancestors(outcome).
/// Numeric columns with more than four distinct values are binned into quartiles.
EffectEstimate estimate_impact(const RunTable& table, const CausalGraph& graph, const Contrast& treatment,
                               const std::string& outcome);

// ---- pareto ----

struct Objective {
    std::string column;
    Direction direction = Direction::LowerBetter;
};

struct ParetoPoint {
    std::string id;
    std::vector<std::optional<double>> values;  // one per objective
};

/// Ids of the non-dominated points in input order; identical points are all kept.
std::vector<std::string> pareto_front(const std::vector<ParetoPoint>& points, const std::vector<Direction>& directions);

/// Points from table rows; ids are `<run_id>/<scenario_key>` (or the row index if absent).
std::vector<ParetoPoint> pareto_points(const RunTable& table, const std::vector<Objective>& objectives);

// ---- predict ----

struct FactorEffect {
    std::string column;
    std::string level;
    double effect = 0;

    bool operator==(const FactorEffect&) const = default;
};

struct OutcomePrediction {
    std::string outcome;
    double point = 0;
    double lower = 0;
    double upper = 0;
    bool exact_cell = false;               // the target's cell was observed; point is its mean
    std::int64_t rows_used = 0;
    std::vector<std::string> factors;      // columns from the outcome's parent nodes
    std::vector<FactorEffect> transferred; // seen levels (shareable)
    std::vector<FactorEffect> defaulted;   // unseen or unassigned levels, effect 0 (non-shareable)
};

using Assignment = std::map<std::string, Scalar>;

/// Additive factor-effects model per outcome over the columns of the
/// outcome's parent nodes. `outcomes` empty = every outcome column with data.
std::vector<OutcomePrediction> predict(const RunTable& table, const CausalGraph& graph, const Assignment& target,
                                       const std::vector<std::string>& outcomes = {});

// ---- recommend ----

struct Recommendation {
    Assignment configuration;
    std::string key;  // canonical JSON of the configuration
    std::int64_t coverage = 0;
    double interval_width = 0;
    std::optional<double> predicted;
};

/// Candidates = cartesian product of the grid. Ranked by coverage ascending,
/// interval width descending, then key. Candidates fixing dataset, model and
/// every hp.* column that match an executed row are excluded.
std::vector<Recommendation> recommend(const RunTable& table, const CausalGraph& graph,
                                      const std::map<std::string, std::vector<Scalar>>& grid, std::size_t k,
                                      const std::string& outcome);

// ---- JSON ----

Json table_to_json(const RunTable& t);
RunTable table_from_json(const Json& j);
Json to_json(const Coverage& c);
Json to_json(const EffectEstimate& e);
Json to_json(const OutcomePrediction& p);
Json to_json(const Recommendation& r);
FilterOp parse_filter_op(std::string_view s);
AggFn parse_agg_fn(std::string_view s);
std::string_view to_string(AggFn f);

}  // namespace cb
