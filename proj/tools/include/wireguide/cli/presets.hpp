#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace wireguide::cli {

std::vector<std::string> preset_names();

/// Configuration text of a shipped preset. Throws ValidationError for an unknown name.
std::string preset_text(std::string_view name);

}  // namespace wireguide::cli
