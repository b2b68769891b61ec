#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hive/geometry.hpp"

namespace hive {

enum class Team : std::uint8_t { Ally = 0, Enemy = 1 };

constexpr Team opponent(Team t) { return t == Team::Ally ? Team::Enemy : Team::Ally; }
constexpr std::size_t team_index(Team t) { return static_cast<std::size_t>(t); }
std::string_view team_name(Team t);

/// Unit kinds known to the behaviour-tree grammar. Only the first three have
/// shipped stats; the rest parse but are flagged.
enum class UnitKind : std::uint8_t { Spearmen, Archer, Cavalry, Balista, Dragon, Civilian };

constexpr std::size_t kUnitKindCount = 6;

/// Grammar spelling: spearmen, archer, cavalry, balista, dragon, civilian.
std::string_view kind_name(UnitKind k);
std::optional<UnitKind> kind_from_name(std::string_view name);
constexpr bool is_shipped(UnitKind k) { return k <= UnitKind::Cavalry; }

enum class Glyph : std::uint8_t { Square, Circle, Triangle };
std::string_view glyph_name(Glyph g);

struct UnitType {
    UnitKind kind = UnitKind::Spearmen;
    double speed = 1.0;         // meters per tick
    int max_health = 1;
    int damage = 1;
    double attack_range = 1.0;  // meters
    double sight_range = 15.0;  // meters
    int cooldown = 1;           // ticks between attacks
    Glyph glyph = Glyph::Square;

    bool operator==(const UnitType&) const = default;
};

/// Stats per unit kind. Only shipped kinds are populated by default.
class UnitTable {
public:
    /// Spearman 1/24/1/1 square, archer 2/2/3/15 circle, cavalry 6/12/1/1
    /// triangle (speed/health/damage/range), sight 15 m, cooldown 1.
    static UnitTable standard();

    const UnitType& operator[](UnitKind k) const { return types_[static_cast<std::size_t>(k)]; }
    UnitType& operator[](UnitKind k) { return types_[static_cast<std::size_t>(k)]; }

    bool operator==(const UnitTable&) const = default;

private:
    std::array<UnitType, kUnitKindCount> types_{};
};

struct Unit {
    int id = 0;  // dense per team, 0-based
    Team team = Team::Ally;
    UnitKind kind = UnitKind::Spearmen;
    Vec2 pos;
    int health = 1;
    int cooldown_left = 0;

    bool alive() const { return health > 0; }
    bool operator==(const Unit&) const = default;
};

}  // namespace hive
