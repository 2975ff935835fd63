#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace vqm::detail {

/// Rows of a numeric CSV whose first line must equal `header`. Every row
/// must have as many columns as the header.
std::vector<std::vector<double>> read_numeric_csv(const std::filesystem::path& path, const std::string& header);

} // namespace vqm::detail
