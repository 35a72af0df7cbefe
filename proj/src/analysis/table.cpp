#include <algorithm>
#include <cmath>
#include <set>

#include "cb/analysis/analysis.hpp"
#include "cb/core/context.hpp"
#include "cb/registry/registry.hpp"

namespace cb {

namespace {

std::optional<double> as_number(const Scalar& s) {
    if (auto i = std::get_if<std::int64_t>(&s)) return static_cast<double>(*i);
    if (auto d = std::get_if<double>(&s)) return *d;
    return std::nullopt;
}

int type_rank(const Scalar& s) {
    if (std::holds_alternative<bool>(s)) return 0;
    if (std::holds_alternative<std::string>(s)) return 2;
    return 1;
}

bool matches(const Cell& cell, const Filter& f) {
    if (f.op == FilterOp::IsNull) return !cell;
    if (f.op == FilterOp::NotNull) return cell.has_value();
    if (!cell) return false;
    switch (f.op) {
        case FilterOp::Eq: return scalar_equal(*cell, f.value);
        case FilterOp::Ne: return !scalar_equal(*cell, f.value);
        case FilterOp::Lt: return scalar_less(*cell, f.value);
        case FilterOp::Le: return !scalar_less(f.value, *cell);
        case FilterOp::Gt: return scalar_less(f.value, *cell);
        case FilterOp::Ge: return !scalar_less(*cell, f.value);
        default: return false;
    }
}

Cell aggregate(AggFn fn, std::vector<double> values) {
    if (fn == AggFn::Count) return Scalar{static_cast<std::int64_t>(values.size())};
    if (values.empty()) return std::nullopt;
    switch (fn) {
        case AggFn::Mean: {
            double sum = 0;
            for (double v : values) sum += v;
            return Scalar{sum / static_cast<double>(values.size())};
        }
        case AggFn::Median: {
            std::sort(values.begin(), values.end());
            std::size_t n = values.size();
            return Scalar{n % 2 ? values[n / 2] : (values[n / 2 - 1] + values[n / 2]) / 2.0};
        }
        case AggFn::Min: return Scalar{*std::min_element(values.begin(), values.end())};
        case AggFn::Max: return Scalar{*std::max_element(values.begin(), values.end())};
        default: return std::nullopt;
    }
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

std::string_view to_string(ColumnKind k) {
    switch (k) {
        case ColumnKind::Meta: return "meta";
        case ColumnKind::Factor: return "factor";
        case ColumnKind::Outcome: return "outcome";
    }
    return "factor";
}

std::string_view to_string(AggFn f) {
    switch (f) {
        case AggFn::Mean: return "mean";
        case AggFn::Median: return "median";
        case AggFn::Min: return "min";
        case AggFn::Max: return "max";
        case AggFn::Count: return "count";
    }
    return "mean";
}

AggFn parse_agg_fn(std::string_view s) {
    for (AggFn f : {AggFn::Mean, AggFn::Median, AggFn::Min, AggFn::Max, AggFn::Count}) {
        if (to_string(f) == s) return f;
    }
    throw Error(ErrorCode::SchemaViolation, "unknown aggregate '" + std::string(s) + "'");
}

FilterOp parse_filter_op(std::string_view s) {
    static const std::map<std::string, FilterOp, std::less<>> ops{
        {"eq", FilterOp::Eq}, {"ne", FilterOp::Ne}, {"lt", FilterOp::Lt},          {"le", FilterOp::Le},
        {"gt", FilterOp::Gt}, {"ge", FilterOp::Ge}, {"is-null", FilterOp::IsNull}, {"not-null", FilterOp::NotNull},
    };
    auto it = ops.find(s);
    if (it == ops.end()) throw Error(ErrorCode::SchemaViolation, "unknown filter op '" + std::string(s) + "'");
    return it->second;
}

bool scalar_equal(const Scalar& a, const Scalar& b) {
    auto x = as_number(a), y = as_number(b);
    if (x && y) return *x == *y;
    return a == b;
}

bool scalar_less(const Scalar& a, const Scalar& b) {
    int ra = type_rank(a), rb = type_rank(b);
    if (ra != rb) return ra < rb;
    if (ra == 1) return *as_number(a) < *as_number(b);
    if (ra == 0) return std::get<bool>(a) < std::get<bool>(b);
    return std::get<std::string>(a) < std::get<std::string>(b);
}

bool cell_less(const Cell& a, const Cell& b) {
    if (!a || !b) return !a && b.has_value();
    return scalar_less(*a, *b);
}

std::string scalar_text(const Scalar& s) {
    if (auto str = std::get_if<std::string>(&s)) return *str;
    return canonical_dump(Json(s));
}

std::optional<std::size_t> RunTable::find(std::string_view name) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (columns[i].name == name) return i;
    }
    return std::nullopt;
}

std::size_t RunTable::index(std::string_view name) const {
    if (auto i = find(name)) return *i;
    throw Error(ErrorCode::UnknownColumn, "no column '" + std::string(name) + "'");
}

RunTable build_table(const std::vector<BenchmarkRun>& runs, const std::map<ComponentId, DatasetDescriptor>& datasets) {
    static const std::vector<std::string> meta{"run_id", "context_id", "executed_by", "scenario_key", "profile_hash", "status"};

    std::vector<std::map<std::string, Scalar>> records;
    std::set<std::string> data_cols, hp_cols, hw_cols, sw_cols, acc_cols, other_outcomes;
    for (const auto& run : runs) {
        for (const auto& r : run.results) {
            std::map<std::string, Scalar> rec;
            rec["run_id"] = run.run_id;
            rec["context_id"] = run.context_id;
            rec["executed_by"] = run.executed_by;
            rec["scenario_key"] = scenario_key(r.scenario);
            rec["profile_hash"] = run.profile.profile_hash;
            rec["status"] = std::string(to_string(r.status));

            rec["dataset"] = r.scenario.dataset.str();
            if (auto it = datasets.find(r.scenario.dataset); it != datasets.end()) {
                for (const auto& [k, v] : it->second.config) {
                    rec["data." + k] = v;
                    data_cols.insert("data." + k);
                }
            }
            rec["model"] = r.scenario.model.str();
            for (const auto& [k, v] : r.scenario.hyper.values) {
                rec["hp." + k] = v;
                hp_cols.insert("hp." + k);
            }
            const auto& p = run.profile;
            rec["hw.cpu_model"] = p.cpu_model;
            rec["hw.physical_cores"] = p.physical_cores;
            rec["hw.total_memory_bytes"] = p.total_memory_bytes;
            hw_cols.insert({"hw.cpu_model", "hw.physical_cores", "hw.total_memory_bytes", "hw.gpu_model"});
            if (p.gpu_model) rec["hw.gpu_model"] = *p.gpu_model;
            rec["sw.os"] = p.os_name_version;
            sw_cols.insert("sw.os");
            for (const auto& [k, v] : p.runtime_versions) {
                rec["sw." + k] = v;
                sw_cols.insert("sw." + k);
            }
            for (const auto& [m, v] : r.accuracy) {
                rec["acc." + m.str()] = v;
                acc_cols.insert("acc." + m.str());
            }
            for (const auto& [k, v] : r.timing) {
                rec[k] = v;
                other_outcomes.insert(k);
            }
            for (const auto& [k, v] : r.resources) {
                rec[k] = v;
                other_outcomes.insert(k);
            }
            records.push_back(std::move(rec));
        }
    }
    // timing keys are always present as columns, even if every cell is null
    for (auto k : {kWallTime, kCpuTime, kGpuTime, kPeakCpuMemory, kPeakGpuMemory}) other_outcomes.insert(std::string(k));

    RunTable t;
    for (const auto& m : meta) t.columns.push_back({m, ColumnKind::Meta});
    t.columns.push_back({"dataset", ColumnKind::Factor});
    for (const auto& c : data_cols) t.columns.push_back({c, ColumnKind::Factor});
    t.columns.push_back({"model", ColumnKind::Factor});
    for (const auto* group : {&hp_cols, &hw_cols, &sw_cols}) {
        for (const auto& c : *group) t.columns.push_back({c, ColumnKind::Factor});
    }
    for (const auto* group : {&acc_cols, &other_outcomes}) {
        for (const auto& c : *group) t.columns.push_back({c, ColumnKind::Outcome});
    }
    for (const auto& rec : records) {
        std::vector<Cell> row;
        row.reserve(t.columns.size());
        for (const auto& c : t.columns) {
            auto it = rec.find(c.name);
            row.push_back(it == rec.end() ? Cell{} : Cell{it->second});
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

std::string to_csv(const RunTable& table) {
    std::string out;
    for (std::size_t i = 0; i < table.columns.size(); ++i) out += (i ? "," : "") + csv_field(table.columns[i].name);
    out += "\n";
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out += ",";
            out += row[i] ? csv_field(scalar_text(*row[i])) : "null";
        }
        out += "\n";
    }
    return out;
}

RunTable slice(const RunTable& table, const std::vector<Filter>& filters, const std::vector<std::string>& group_by,
               const std::vector<Aggregate>& aggregates) {
    std::vector<std::pair<std::size_t, const Filter*>> fcols;
    for (const auto& f : filters) fcols.emplace_back(table.index(f.column), &f);
    std::vector<std::size_t> gcols;
    for (const auto& g : group_by) gcols.push_back(table.index(g));
    std::vector<std::size_t> acols;
    for (const auto& a : aggregates) acols.push_back(table.index(a.column));

    auto key_less = [](const std::vector<Cell>& a, const std::vector<Cell>& b) {
        return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(), cell_less);
    };
    std::map<std::vector<Cell>, std::vector<std::size_t>, decltype(key_less)> groups(key_less);
    if (gcols.empty()) groups[{}];
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        bool keep = std::all_of(fcols.begin(), fcols.end(), [&](const auto& f) { return matches(row[f.first], *f.second); });
        if (!keep) continue;
        std::vector<Cell> key;
        for (auto c : gcols) key.push_back(row[c]);
        groups[key].push_back(r);
    }

    RunTable out;
    for (auto c : gcols) out.columns.push_back(table.columns[c]);
    std::vector<std::string> counted;
    for (const auto& a : aggregates) {
        out.columns.push_back({std::string(to_string(a.fn)) + "(" + a.column + ")", ColumnKind::Outcome});
        if (std::find(counted.begin(), counted.end(), a.column) == counted.end()) counted.push_back(a.column);
    }
    for (const auto& c : counted) out.columns.push_back({"n(" + c + ")", ColumnKind::Meta});

    for (const auto& [key, members] : groups) {
        std::vector<Cell> row = key;
        std::map<std::string, std::int64_t> nonnull;
        for (std::size_t i = 0; i < aggregates.size(); ++i) {
            std::vector<double> values;
            for (auto r : members) {
                const Cell& cell = table.rows[r][acols[i]];
                if (!cell) continue;
                if (auto v = as_number(*cell)) {
                    values.push_back(*v);
                } else if (aggregates[i].fn == AggFn::Count) {
                    values.push_back(0);
                }
            }
            nonnull[aggregates[i].column] = static_cast<std::int64_t>(values.size());
            row.push_back(aggregate(aggregates[i].fn, std::move(values)));
        }
        for (const auto& c : counted) row.push_back(Scalar{nonnull[c]});
        out.rows.push_back(std::move(row));
    }
    return out;
}

VirtualRun assemble_virtual_run(const std::vector<BenchmarkRun>& accessible_runs, const BenchmarkContext& context,
                                const std::map<ComponentId, DatasetDescriptor>& datasets) {
    std::set<std::string> wanted;
    for (const auto& s : expand_context(context)) wanted.insert(scenario_key(s));

    std::vector<BenchmarkRun> picked;
    std::set<std::string> matched, profiles;
    for (const auto& run : accessible_runs) {
        BenchmarkRun part = run;
        part.results.clear();
        for (const auto& r : run.results) {
            auto key = scenario_key(r.scenario);
            if (!wanted.contains(key)) continue;
            matched.insert(key);
            profiles.insert(run.profile.profile_hash);
            part.results.push_back(r);
        }
        if (!part.results.empty()) picked.push_back(std::move(part));
    }

    VirtualRun v;
    v.table = build_table(picked, datasets);
    for (const auto& k : wanted) (matched.contains(k) ? v.coverage.matched : v.coverage.unmatched).push_back(k);
    v.coverage.profiles.assign(profiles.begin(), profiles.end());
    return v;
}

VirtualRun assemble_virtual_run(const Registry& registry, const BenchmarkContext& context, const std::string& principal) {
    std::map<ComponentId, DatasetDescriptor> datasets;
    for (const auto& id : context.datasets) {
        try {
            auto rec = registry.describe(id, principal);
            if (auto d = std::get_if<DatasetDescriptor>(&rec.descriptor)) datasets.emplace(id, *d);
        } catch (const Error&) {
            // unknown or private datasets simply contribute no data.* columns
        }
    }
    return assemble_virtual_run(registry.accessible_runs(principal), context, datasets);
}

Json table_to_json(const RunTable& t) {
    Json cols = Json::array();
    for (const auto& c : t.columns) cols.push_back({{"name", c.name}, {"kind", to_string(c.kind)}});
    Json rows = Json::array();
    for (const auto& r : t.rows) {
        Json row = Json::array();
        for (const auto& c : r) row.push_back(c ? Json(*c) : Json(nullptr));
        rows.push_back(std::move(row));
    }
    return Json{{"columns", cols}, {"rows", rows}};
}

RunTable table_from_json(const Json& j) {
    try {
        RunTable t;
        for (const auto& c : j.at("columns")) {
            auto kind = c.at("kind").get<std::string>();
            ColumnKind k = kind == "meta" ? ColumnKind::Meta : kind == "outcome" ? ColumnKind::Outcome : ColumnKind::Factor;
            t.columns.push_back({c.at("name").get<std::string>(), k});
        }
        for (const auto& r : j.at("rows")) {
            if (r.size() != t.columns.size()) throw Error(ErrorCode::SchemaViolation, "row width differs from columns");
            std::vector<Cell> row;
            for (const auto& c : r) row.push_back(c.is_null() ? Cell{} : Cell{c.get<Scalar>()});
            t.rows.push_back(std::move(row));
        }
        return t;
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::SchemaViolation, std::string("malformed table: ") + e.what());
    }
}

Json to_json(const Coverage& c) {
    return Json{{"matched", c.matched}, {"unmatched", c.unmatched}, {"profiles", c.profiles}};
}

}  // namespace cb
