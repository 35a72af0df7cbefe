#include <algorithm>
#include <cmath>
#include <numeric>

#include "cb/analysis/analysis.hpp"
#include "cb/core/error.hpp"
#include "levels.hpp"

namespace cb {

std::vector<std::string> pareto_front(const std::vector<ParetoPoint>& points, const std::vector<Direction>& directions) {
    const std::size_t d = directions.size();
    std::vector<std::vector<double>> v(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (points[i].values.size() != d) throw Error(ErrorCode::ShapeMismatch, "point '" + points[i].id + "' has the wrong arity");
        for (std::size_t k = 0; k < d; ++k) {
            const auto& x = points[i].values[k];
            if (!x || !std::isfinite(*x)) {
                throw Error(ErrorCode::MissingObjective, "point '" + points[i].id + "' lacks objective " + std::to_string(k));
            }
            v[i].push_back(directions[k] == Direction::LowerBetter ? *x : -*x);
        }
    }

    std::vector<std::size_t> order(points.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });

    auto dominates = [&](std::size_t a, std::size_t b) {
        bool strict = false;
        for (std::size_t k = 0; k < d; ++k) {
            if (v[a][k] > v[b][k]) return false;
            strict = strict || v[a][k] < v[b][k];
        }
        return strict;
    };

    // after a lexicographic sort no point can be dominated by a later one
    std::vector<std::size_t> front;
    for (auto i : order) {
        if (std::none_of(front.begin(), front.end(), [&](auto f) { return dominates(f, i); })) front.push_back(i);
    }
    std::sort(front.begin(), front.end());
    std::vector<std::string> ids;
    for (auto i : front) ids.push_back(points[i].id);
    return ids;
}

std::vector<ParetoPoint> pareto_points(const RunTable& table, const std::vector<Objective>& objectives) {
    std::vector<std::size_t> cols;
    for (const auto& o : objectives) cols.push_back(table.index(o.column));
    auto run = table.find("run_id");
    auto key = table.find("scenario_key");

    std::vector<ParetoPoint> out;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        ParetoPoint p;
        if (run && key && row[*run] && row[*key]) {
            p.id = scalar_text(*row[*run]) + "/" + scalar_text(*row[*key]);
        } else {
            p.id = std::to_string(r);
        }
        for (auto c : cols) p.values.push_back(detail::numeric(row[c]));
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace cb
