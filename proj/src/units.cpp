#include "hive/units.hpp"

namespace hive {

std::string_view team_name(Team t) { return t == Team::Ally ? "ally" : "enemy"; }

std::string_view kind_name(UnitKind k) {
    switch (k) {
        case UnitKind::Spearmen: return "spearmen";
        case UnitKind::Archer: return "archer";
        case UnitKind::Cavalry: return "cavalry";
        case UnitKind::Balista: return "balista";
        case UnitKind::Dragon: return "dragon";
        case UnitKind::Civilian: return "civilian";
    }
    return "spearmen";
}

std::optional<UnitKind> kind_from_name(std::string_view name) {
    for (std::size_t i = 0; i < kUnitKindCount; ++i) {
        const auto k = static_cast<UnitKind>(i);
        if (kind_name(k) == name) return k;
    }
    return std::nullopt;
}

std::string_view glyph_name(Glyph g) {
    switch (g) {
        case Glyph::Square: return "square";
        case Glyph::Circle: return "circle";
        case Glyph::Triangle: return "triangle";
    }
    return "square";
}

UnitTable UnitTable::standard() {
    UnitTable t;
    t[UnitKind::Spearmen] = {UnitKind::Spearmen, 1.0, 24, 1, 1.0, 15.0, 1, Glyph::Square};
    t[UnitKind::Archer] = {UnitKind::Archer, 2.0, 2, 3, 15.0, 15.0, 1, Glyph::Circle};
    t[UnitKind::Cavalry] = {UnitKind::Cavalry, 6.0, 12, 1, 1.0, 15.0, 1, Glyph::Triangle};
    // Grammar-only kinds get placeholder stats so lookups are total.
    t[UnitKind::Balista] = {UnitKind::Balista, 1.0, 1, 0, 0.0, 15.0, 1, Glyph::Square};
    t[UnitKind::Dragon] = {UnitKind::Dragon, 1.0, 1, 0, 0.0, 15.0, 1, Glyph::Square};
    t[UnitKind::Civilian] = {UnitKind::Civilian, 1.0, 1, 0, 0.0, 15.0, 1, Glyph::Square};
    return t;
}

}  // namespace hive
