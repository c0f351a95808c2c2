#pragma once

namespace ebtd::detail {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

} // namespace ebtd::detail
