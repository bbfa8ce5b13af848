#pragma once

#include <string_view>

namespace spatial::detail {

/// Contents of core/prompts/<name>, empty when unknown.
std::string_view prompt_fixture(std::string_view name);

}  // namespace spatial::detail
