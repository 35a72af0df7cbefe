#pragma once

#include <algorithm>
#include <cmath>
#include <set>

#include "cb/analysis/analysis.hpp"

namespace cb::detail {

inline std::optional<double> numeric(const Cell& c) {
    if (!c) return std::nullopt;
    if (auto i = std::get_if<std::int64_t>(&*c)) return static_cast<double>(*i);
    if (auto d = std::get_if<double>(&*c)) return *d;
    return std::nullopt;
}

// Maps cells of one column to discrete level labels. Numeric columns with
// more than four distinct values fall into quartile bins q1..q4.
class Leveler {
public:
    Leveler(const RunTable& table, std::size_t column, const std::vector<std::size_t>& rows) {
        std::vector<double> values;
        std::set<double> distinct;
        for (auto r : rows) {
            if (auto v = numeric(table.rows[r][column])) {
                values.push_back(*v);
                distinct.insert(*v);
            }
        }
        if (distinct.size() <= 4) return;
        std::sort(values.begin(), values.end());
        for (double p : {0.25, 0.5, 0.75}) {
            double pos = p * static_cast<double>(values.size() - 1);
            auto lo = static_cast<std::size_t>(std::floor(pos));
            auto hi = std::min(lo + 1, values.size() - 1);
            cuts_.push_back(values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]));
        }
    }

    bool binned() const { return !cuts_.empty(); }

    std::string label(const Cell& c) const {
        if (!c) return "null";
        if (binned()) {
            if (auto v = numeric(c)) {
                std::size_t q = 0;
                while (q < cuts_.size() && *v > cuts_[q]) ++q;
                return "q" + std::to_string(q + 1);
            }
        }
        return scalar_text(*c);
    }

private:
    std::vector<double> cuts_;
};

}  // namespace cb::detail
