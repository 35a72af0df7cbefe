// Reference causal discovery model: edge i->j (i<j) when |Pearson r| > threshold.

#include <cmath>

#include "plugin_io.hpp"

int main(int argc, char** argv) try {
    const std::filesystem::path wd = argc > 1 ? argv[1] : ".";
    auto inputs = nlohmann::json::parse(plugin::read_file(wd / "inputs.json"));
    auto params = nlohmann::json::parse(plugin::read_file(wd / "params.json"));
    const double threshold = params.value("threshold", 0.3);

    auto data = plugin::read_csv(inputs.at("inputs").at("observations").get<std::string>());
    const std::size_t n = data.header.size(), rows = data.rows.size();
    if (rows < 2) throw std::runtime_error("need at least two rows");

    std::vector<double> mean(n, 0.0), sd(n, 0.0);
    for (const auto& r : data.rows)
        for (std::size_t k = 0; k < n; ++k) mean[k] += r[k] / rows;
    for (const auto& r : data.rows)
        for (std::size_t k = 0; k < n; ++k) sd[k] += (r[k] - mean[k]) * (r[k] - mean[k]);

    std::string csv;
    for (std::size_t k = 0; k < n; ++k) csv += (k ? "," : "") + data.header[k];
    csv += "\n";
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            int edge = 0;
            if (i < j) {
                double cov = 0;
                for (const auto& r : data.rows) cov += (r[i] - mean[i]) * (r[j] - mean[j]);
                double corr = cov / std::sqrt(sd[i] * sd[j]);
                edge = std::abs(corr) > threshold;
            }
            csv += (j ? "," : "") + std::to_string(edge);
        }
        csv += "\n";
    }
    std::filesystem::create_directories(wd / "outputs");
    plugin::write_file(wd / "outputs" / "graph.csv", csv);
    std::cout << "threshold=" << threshold << " variables=" << n << " rows=" << rows << "\n";
    return 0;
} catch (const std::exception& e) {
    std::cerr << "threshold: " << e.what() << "\n";
    return 1;
}
