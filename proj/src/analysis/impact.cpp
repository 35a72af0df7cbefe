#include <algorithm>
#include <cmath>

#include "cb/analysis/analysis.hpp"
#include "cb/core/error.hpp"
#include "levels.hpp"

namespace cb {

namespace {

struct Arm {
    double sum = 0;
    std::int64_t n = 0;

    void add(double y) {
        sum += y;
        ++n;
    }
    double mean() const { return sum / static_cast<double>(n); }
};

double sample_var(const std::vector<double>& ys) {
    if (ys.size() < 2) return 0;
    double m = 0;
    for (double y : ys) m += y;
    m /= static_cast<double>(ys.size());
    double ss = 0;
    for (double y : ys) ss += (y - m) * (y - m);
    return ss / static_cast<double>(ys.size() - 1);
}

}  // namespace

EffectEstimate estimate_impact(const RunTable& table, const CausalGraph& graph, const Contrast& treatment,
                               const std::string& outcome) {
    const std::size_t tcol = table.index(treatment.column);
    const std::size_t ycol = table.index(outcome);
    const auto& tnode = graph.node_of_column(treatment.column);
    const auto& ynode = graph.node_of_column(outcome);
    if (tnode.kind != ColumnKind::Factor) throw Error(ErrorCode::SchemaViolation, "treatment must be a factor column");
    if (ynode.kind != ColumnKind::Outcome) throw Error(ErrorCode::SchemaViolation, "outcome must be an outcome column");
    if (scalar_equal(treatment.level_a, treatment.level_b)) throw Error(ErrorCode::SchemaViolation, "contrast levels are equal");

    EffectEstimate e;
    e.treatment = treatment;
    e.outcome = outcome;
    auto anc = graph.ancestors(ynode.name);
    for (const auto& p : graph.parents(tnode.name)) {
        if (std::find(anc.begin(), anc.end(), p) != anc.end()) e.adjusted_for.push_back(p);
    }
    for (const auto& n : e.adjusted_for) {
        for (const auto& c : graph.columns_of(graph.node(n), table)) {
            if (c != treatment.column && c != outcome) e.stratified_on.push_back(c);
        }
    }

    // rows with a usable outcome in one of the two arms
    std::vector<std::size_t> used;
    std::vector<int> arm;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& t = table.rows[r][tcol];
        if (!t || !detail::numeric(table.rows[r][ycol])) continue;
        if (scalar_equal(*t, treatment.level_a)) {
            arm.push_back(0);
        } else if (scalar_equal(*t, treatment.level_b)) {
            arm.push_back(1);
        } else {
            continue;
        }
        used.push_back(r);
    }

    std::vector<std::size_t> scols;
    std::vector<detail::Leveler> levelers;
    for (const auto& c : e.stratified_on) {
        scols.push_back(table.index(c));
        levelers.emplace_back(table, scols.back(), used);
    }

    struct Stratum {
        Arm a, b;
        std::vector<double> ya, yb;
    };
    std::map<std::string, Stratum> strata;
    Arm all_a, all_b;
    for (std::size_t i = 0; i < used.size(); ++i) {
        const auto& row = table.rows[used[i]];
        std::string label;
        for (std::size_t k = 0; k < scols.size(); ++k) {
            label += (k ? "|" : "") + e.stratified_on[k] + "=" + levelers[k].label(row[scols[k]]);
        }
        double y = *detail::numeric(row[ycol]);
        auto& s = strata[label];
        if (arm[i] == 0) {
            s.a.add(y);
            s.ya.push_back(y);
            all_a.add(y);
        } else {
            s.b.add(y);
            s.yb.push_back(y);
            all_b.add(y);
        }
    }
    if (all_a.n == 0 || all_b.n == 0) throw Error(ErrorCode::NoOverlap, "one treatment level has no rows with this outcome");
    e.unadjusted = all_a.mean() - all_b.mean();

    std::int64_t total = 0;
    for (const auto& [label, s] : strata) {
        if (s.a.n == 0 || s.b.n == 0) {
            e.dropped_strata.push_back(label);
            continue;
        }
        total += s.a.n + s.b.n;
        e.strata.push_back({label, s.a.mean(), s.b.mean(), s.a.n, s.b.n});
    }
    if (e.strata.empty()) throw Error(ErrorCode::NoOverlap, "no stratum contains both treatment levels");

    double est = 0, var = 0;
    for (const auto& d : e.strata) {
        const auto& s = strata.at(d.stratum);
        double w = static_cast<double>(d.n_a + d.n_b) / static_cast<double>(total);
        est += w * (d.mean_a - d.mean_b);
        var += w * w * (sample_var(s.ya) / static_cast<double>(d.n_a) + sample_var(s.yb) / static_cast<double>(d.n_b));
    }
    e.estimate = est;
    e.standard_error = std::sqrt(var);
    return e;
}

Json to_json(const EffectEstimate& e) {
    Json strata = Json::array();
    for (const auto& s : e.strata) {
        strata.push_back({{"stratum", s.stratum}, {"mean_a", s.mean_a}, {"mean_b", s.mean_b}, {"n_a", s.n_a}, {"n_b", s.n_b}});
    }
    return Json{
        {"treatment", {{"column", e.treatment.column}, {"level_a", e.treatment.level_a}, {"level_b", e.treatment.level_b}}},
        {"outcome", e.outcome},
        {"adjusted_for", e.adjusted_for},
        {"stratified_on", e.stratified_on},
        {"estimate", e.estimate},
        {"standard_error", e.standard_error},
        {"unadjusted", e.unadjusted},
        {"strata", strata},
        {"dropped_strata", e.dropped_strata},
    };
}

}  // namespace cb
