// Reference metric: directed structural Hamming distance between two adjacency CSVs.

#include <map>

#include "plugin_io.hpp"

int main(int argc, char** argv) try {
    const std::filesystem::path wd = argc > 1 ? argv[1] : ".";
    auto inputs = nlohmann::json::parse(plugin::read_file(wd / "inputs.json")).at("inputs");
    auto est = plugin::read_csv(inputs.at("estimated").get<std::string>());
    auto truth = plugin::read_csv(inputs.at("truth").get<std::string>());
    const std::size_t n = truth.header.size();
    if (est.header.size() != n || est.rows.size() != n || truth.rows.size() != n)
        throw std::runtime_error("adjacency shapes differ");

    // align the estimate to the truth's variable order
    std::map<std::string, std::size_t> pos;
    for (std::size_t k = 0; k < n; ++k) pos[est.header[k]] = k;
    int shd = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            auto pi = pos.at(truth.header[i]), pj = pos.at(truth.header[j]);
            if ((est.rows[pi][pj] != 0) != (truth.rows[i][j] != 0)) ++shd;
        }
    }
    plugin::write_file(wd / "result.json", nlohmann::json{{"value", shd}}.dump());
    std::cout << "shd=" << shd << "\n";
    return 0;
} catch (const std::exception& e) {
    std::cerr << "shd: " << e.what() << "\n";
    return 1;
}
