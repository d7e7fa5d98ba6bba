#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace epsim {

/// Index-backed identifier. The tag keeps lane, road and intersection ids
/// from being mixed up at compile time.
template <class Tag>
struct Id {
    std::int32_t value = -1;

    constexpr Id() = default;
    constexpr explicit Id(std::int32_t v) : value(v) {}
    constexpr explicit Id(std::size_t v) : value(static_cast<std::int32_t>(v)) {}

    constexpr std::size_t index() const { return static_cast<std::size_t>(value); }
    constexpr bool valid() const { return value >= 0; }

    constexpr auto operator<=>(const Id&) const = default;
};

using LaneId = Id<struct LaneTag>;
using RoadId = Id<struct RoadTag>;
using IntersectionId = Id<struct IntersectionTag>;

/// Invalid user-supplied configuration: bad files, unknown ids, bad flags.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A caller broke a documented precondition.
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace epsim

template <class Tag>
struct std::hash<epsim::Id<Tag>> {
    std::size_t operator()(const epsim::Id<Tag>& id) const noexcept {
        return std::hash<std::int32_t>{}(id.value);
    }
};
