#pragma once

namespace lqmfg
{

inline constexpr const char* version = "1.0.0";

}  // namespace lqmfg
