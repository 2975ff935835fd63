#include "csv.hpp"

#include "vaporqm/errors.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace vqm::detail {

std::vector<std::vector<double>> read_numeric_csv(const std::filesystem::path& path, const std::string& header)
{
    std::ifstream in(path);
    if (!in)
        throw ValidationError("cannot open " + path.string());
    std::string line;
    std::getline(in, line);
    if (!line.empty() && line.back() == '\r')
        line.pop_back();
    if (line != header)
        throw ValidationError(path.string() + ": expected header " + header);
    const auto columns = static_cast<std::size_t>(std::count(header.begin(), header.end(), ',') + 1);

    std::vector<std::vector<double>> rows;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line == "\r")
            continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ss(line);
        std::vector<double> values;
        double v;
        while (ss >> v)
            values.push_back(v);
        if (!ss.eof() || values.size() != columns)
            throw ValidationError(path.string() + ":" + std::to_string(row) + ": malformed row");
        rows.push_back(std::move(values));
    }
    return rows;
}

} // namespace vqm::detail
