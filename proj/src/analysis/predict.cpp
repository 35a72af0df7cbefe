#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <Eigen/Dense>

#include "cb/analysis/analysis.hpp"
#include "cb/core/error.hpp"
#include "levels.hpp"

namespace cb {

namespace {

struct FactorColumn {
    std::string name;
    std::size_t index;
    detail::Leveler leveler;
    std::vector<std::string> levels;     // sorted, observed among used rows
    std::optional<std::string> target;   // level the target asks for
};

OutcomePrediction predict_one(const RunTable& table, const CausalGraph& graph, const Assignment& target,
                              const std::string& outcome) {
    const std::size_t ycol = table.index(outcome);
    OutcomePrediction p;
    p.outcome = outcome;

    std::vector<std::size_t> used;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        if (detail::numeric(table.rows[r][ycol])) used.push_back(r);
    }
    if (used.empty()) throw Error(ErrorCode::EmptyTable, "no rows carry outcome '" + outcome + "'");
    p.rows_used = static_cast<std::int64_t>(used.size());

    std::vector<FactorColumn> factors;
    const auto& ynode = graph.node_of_column(outcome);
    for (const auto& parent : graph.parents(ynode.name)) {
        const auto& pnode = graph.node(parent);
        if (pnode.kind != ColumnKind::Factor) continue;
        for (const auto& c : graph.columns_of(pnode, table)) {
            std::size_t idx = table.index(c);
            FactorColumn f{c, idx, detail::Leveler(table, idx, used), {}, std::nullopt};
            std::set<std::string> seen;
            for (auto r : used) seen.insert(f.leveler.label(table.rows[r][idx]));
            f.levels.assign(seen.begin(), seen.end());
            if (auto it = target.find(c); it != target.end()) {
                f.target = f.leveler.label(Cell{it->second});
            } else if (f.levels.size() == 1) {
                // an unassigned factor that never varied keeps its only level
                f.target = f.levels.front();
            }
            p.factors.push_back(c);
            factors.push_back(std::move(f));
        }
    }

    // design: intercept plus deviation-coded columns (last level = -1 on all)
    Eigen::Index cols = 1;
    std::vector<Eigen::Index> offset;
    for (const auto& f : factors) {
        offset.push_back(cols);
        cols += static_cast<Eigen::Index>(f.levels.size()) - 1;
    }
    const auto n = static_cast<Eigen::Index>(used.size());
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(n, cols);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& row = table.rows[used[static_cast<std::size_t>(i)]];
        X(i, 0) = 1;
        y(i) = *detail::numeric(row[ycol]);
        for (std::size_t k = 0; k < factors.size(); ++k) {
            const auto& f = factors[k];
            auto level = f.leveler.label(row[f.index]);
            auto li = std::lower_bound(f.levels.begin(), f.levels.end(), level) - f.levels.begin();
            auto last = static_cast<std::ptrdiff_t>(f.levels.size()) - 1;
            if (li < last) {
                X(i, offset[k] + li) = 1;
            } else {
                for (std::ptrdiff_t j = 0; j < last; ++j) X(i, offset[k] + j) = -1;
            }
        }
    }
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(X);
    Eigen::VectorXd beta = cod.solve(y);
    double rss = (X * beta - y).squaredNorm();
    double sigma = std::sqrt(rss / static_cast<double>(std::max<Eigen::Index>(1, n - cod.rank())));

    double point = beta(0);
    for (std::size_t k = 0; k < factors.size(); ++k) {
        const auto& f = factors[k];
        auto it = f.target ? std::find(f.levels.begin(), f.levels.end(), *f.target) : f.levels.end();
        if (it == f.levels.end()) {
            p.defaulted.push_back({f.name, f.target.value_or("unassigned"), 0.0});
            continue;
        }
        auto li = it - f.levels.begin();
        auto last = static_cast<std::ptrdiff_t>(f.levels.size()) - 1;
        double effect = 0;
        if (li < last) {
            effect = beta(offset[k] + li);
        } else {
            for (std::ptrdiff_t j = 0; j < last; ++j) effect -= beta(offset[k] + j);
        }
        point += effect;
        p.transferred.push_back({f.name, *it, effect});
    }

    if (p.defaulted.empty()) {
        double sum = 0;
        std::size_t count = 0;
        for (auto r : used) {
            const auto& row = table.rows[r];
            bool same = std::all_of(factors.begin(), factors.end(),
                                    [&](const auto& f) { return f.leveler.label(row[f.index]) == *f.target; });
            if (same) {
                sum += *detail::numeric(row[ycol]);
                ++count;
            }
        }
        if (count > 0) {
            point = sum / static_cast<double>(count);
            p.exact_cell = true;
        }
    }
    p.point = point;
    p.lower = point - 2 * sigma;
    p.upper = point + 2 * sigma;
    return p;
}

}  // namespace

std::vector<OutcomePrediction> predict(const RunTable& table, const CausalGraph& graph, const Assignment& target,
                                       const std::vector<std::string>& outcomes) {
    for (const auto& [column, value] : target) table.index(column);
    std::vector<std::string> wanted = outcomes;
    if (wanted.empty()) {
        for (std::size_t c = 0; c < table.columns.size(); ++c) {
            if (table.columns[c].kind != ColumnKind::Outcome) continue;
            bool has = std::any_of(table.rows.begin(), table.rows.end(), [&](const auto& row) { return detail::numeric(row[c]).has_value(); });
            if (has) wanted.push_back(table.columns[c].name);
        }
        if (wanted.empty()) throw Error(ErrorCode::EmptyTable, "table has no outcome data");
    }
    std::vector<OutcomePrediction> out;
    for (const auto& o : wanted) out.push_back(predict_one(table, graph, target, o));
    return out;
}

std::vector<Recommendation> recommend(const RunTable& table, const CausalGraph& graph,
                                      const std::map<std::string, std::vector<Scalar>>& grid, std::size_t k,
                                      const std::string& outcome) {
    table.index(outcome);
    std::vector<std::pair<std::string, std::size_t>> gcols;
    for (const auto& [column, values] : grid) gcols.emplace_back(column, table.index(column));

    std::vector<std::size_t> identity;
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
        const auto& name = table.columns[c].name;
        if (name == "dataset" || name == "model" || name.rfind("hp.", 0) == 0) identity.push_back(c);
    }

    std::vector<Assignment> candidates{{}};
    for (const auto& [column, values] : grid) {
        std::vector<Assignment> next;
        for (const auto& partial : candidates) {
            for (const auto& v : values) {
                auto a = partial;
                a[column] = v;
                next.push_back(std::move(a));
            }
        }
        candidates = std::move(next);
    }

    std::vector<Recommendation> ranked;
    for (auto& a : candidates) {
        if (a.contains("dataset") && a.contains("model")) {
            bool executed = std::any_of(table.rows.begin(), table.rows.end(), [&](const auto& row) {
                return std::all_of(identity.begin(), identity.end(), [&](std::size_t c) {
                    auto it = a.find(table.columns[c].name);
                    if (it == a.end()) return !row[c].has_value();
                    return row[c] && scalar_equal(*row[c], it->second);
                });
            });
            if (executed) continue;
        }
        Recommendation rec;
        rec.key = canonical_dump(Json(a));
        for (const auto& row : table.rows) {
            bool match = std::all_of(gcols.begin(), gcols.end(), [&](const auto& g) {
                return row[g.second] && scalar_equal(*row[g.second], a.at(g.first));
            });
            rec.coverage += match;
        }
        try {
            auto pred = predict(table, graph, a, {outcome}).front();
            rec.predicted = pred.point;
            rec.interval_width = pred.upper - pred.lower;
        } catch (const Error&) {
            rec.interval_width = std::numeric_limits<double>::infinity();
        }
        rec.configuration = std::move(a);
        ranked.push_back(std::move(rec));
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) {
        if (x.coverage != y.coverage) return x.coverage < y.coverage;
        if (x.interval_width != y.interval_width) return x.interval_width > y.interval_width;
        return x.key < y.key;
    });
    if (ranked.size() > k) ranked.resize(k);
    return ranked;
}

Json to_json(const OutcomePrediction& p) {
    auto effects = [](const std::vector<FactorEffect>& v) {
        Json out = Json::array();
        for (const auto& f : v) out.push_back({{"column", f.column}, {"level", f.level}, {"effect", f.effect}});
        return out;
    };
    return Json{
        {"outcome", p.outcome},       {"point", p.point},       {"lower", p.lower},
        {"upper", p.upper},           {"exact_cell", p.exact_cell}, {"rows_used", p.rows_used},
        {"factors", p.factors},       {"transferred", effects(p.transferred)}, {"defaulted", effects(p.defaulted)},
    };
}

Json to_json(const Recommendation& r) {
    Json j{{"configuration", Json(r.configuration)}, {"key", r.key}, {"coverage", r.coverage}};
    j["interval_width"] = std::isfinite(r.interval_width) ? Json(r.interval_width) : Json(nullptr);
    j["predicted"] = r.predicted ? Json(*r.predicted) : Json(nullptr);
    return j;
}

}  // namespace cb
