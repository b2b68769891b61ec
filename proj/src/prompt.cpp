#include <cmath>
#include <cstdio>
#include <sstream>

#include "hive/llm_bridge.hpp"
#include "hive/log.hpp"

namespace hive::llm {

namespace {

// Instruction text, split where live configuration is spliced in.
constexpr std::string_view kPreamble = R"HIVE(    # Map Instruction
    
You are a game assistant that helps the player in a strategy video game. 
Your task is to discuss with the player to come up with a plan to win the game's scenario (which will be provided later). Work with the player by giving feedback about their propositions, asking questions to clarify, obtain more details, or decide between different propositions. The player can also ask you questions.
    

You will be given a textual description of each pertinent element of the map using their name, terrain type, and bounding boxes (bottom-left corner - top-right corner).
In the game, there are four types of terrain:
- Normal: units can cross and see through (by default, the whole map is normal).
- Buildings: units cannot cross or see through buildings.
- Water: units cannot cross over water but can see over it.
- Trees: units cannot see through trees but can move over them. In particular, once a unit is inside a tree area, it cannot see any other unit.
    
Also, for simplicity, bridges that allow crossing water terrain will be specified. They correspond to normal terrain.
You can assume that any part of the map that is not included in any of the pertinent elements has a normal type of terrain.
A common convention is that East = Right, North = Top, West = Left, and South = Bottom. So the point (0, 0) is the bottom-left corner of the map. 
The x-axis increases from West to East = from Left to Right, and the y-axis increases from South to North = from Bottom to Top.
    
Format: 
[Name]: [terrain type] at [circle or square coordinate], [circle or square coordinate], ..., [circle or square coordinate]
where [circle] = [(x, y) coordinates of center] with radius [R]
where [square coordinate] = [(x, y) coordinates of the bottom-left corner] - [(x, y) coordinates of the top-right corner]

### For example 
East Forest: trees at (12, 63) with radius 20
North River: water at (0, 85) - (100, 90)
North River's Bridge: normal at (45, 85) - (55, 90)
West Forest: trees at (0, 23) with radius 6, (5, 33) with radius 7
)HIVE";

constexpr std::string_view kAfterMap = R"HIVE(    

    
)HIVE";

constexpr std::string_view kMarkersIntro = R"HIVE(## Markers
    
Through the discussion, the player can define markers on the map, which will be provided to you using the following format:
)HIVE";

constexpr std::string_view kUnitsHead = R"HIVE(# Information About the Units
    

Description of the unit types in the game:
)HIVE";

constexpr std::string_view kMatchups = R"HIVE(Spearmen are strong against Cavalry because they have more health.
    Cavalry are strong against Archers because they can quickly engage in close combat where Archers are weak.
    Archers are strong against Spearmen because they can attack from a longer distance.

    
Here is the list of unit IDs (in the form of a Python slice a:b with a included and b not included) for each team and the type of units they are composed of:

Descriptions of each team's composition:
)HIVE";

constexpr std::string_view kPlanSyntax = R"HIVE(
    
You will be provided with a list of all the units' current health and position.
Both teams are composed of many units. You should start by analyzing the positions of the units still alive to compose groups and compute their average position so that you can form the plan and send units to the appropriate positions.


# How You Should Handle the Player's Prompt

The user will ask you to write one plan. If you already have a shared conversation and the user asks you to modify or add steps to the plan, take care to build upon the already selected plan.

# Syntax for a Detailed Plan

A detailed plan is a set of steps to achieve in a given order until all the steps are completed.
You must provide the steps of the plan between the two keywords "BEGIN PLAN" and "END PLAN". 
As you only propose one plan, you should use these two keywords once.

One step comprises:
- A numeral ID
- A list of prerequisite steps that need to be completed before the step is rolled out
- An objective
A succession (at least one) of groups of units:
- The unit IDs of the group
- Target position on the map for the units to go to if there are no enemies in sight
- A behavior for the units if there are enemies in sight

# Syntax for a Detailed Plan (continued)

The list of prerequisites corresponds to the list of steps' IDs that must be completed before trying to achieve the objective.

There are two kinds of objectives:
- **Elimination objective:** where the objective is completed when all the targets are eliminated. In that case, you must provide a list of enemies' IDs or the keyword "all" if all enemies are targets.
- **Position objective:** where the objective is completed when all the concerned units are close to their target position.

Position objectives are a good way to move your units, but if the end objective is to eliminate enemies, it can be more straightforward to directly set an elimination objective and use the target position to move the units.
The concerned units are either the keyword "all" (if all the allies' units are concerned) or a list of integers corresponding to the unit IDs.

The behavior corresponds to a low-level and local behavior that the units will follow.
Here is the list of available behaviors:
- **attack_in_close_range:** the unit attacks the enemies in close range if there are enemies or moves toward the target position if there are no enemies.
- **attack_and_move:** the unit attacks the enemies without moving if there are enemies or moves toward the target position if there are no enemies.
- **attack_in_long_range:** the unit attacks the enemies in long range if there are enemies or moves toward the target position if there are no enemies.
- **follow_map:** ignore the enemies and simply move straight to the target objective. Only use it when the player asks you to ignore the enemies.

Apart from standing still, all these behaviors will only be active if an enemy is in sight. Otherwise, they will move to a target position if you set one in the plan or stand still if no target position is set.
Remember that units collide and push each other, so ignoring the enemies may not be the fastest way to reach a target position if there are enemies on the way who could block you.

The syntax format of a step is the following:
Step ID: (where you replace ID with the integer ID of the step)
prerequisites: [s_1, s_2, ..., s_n] (where the s_i correspond to the prerequisites' steps IDs. Note that the list can be empty. In that case, simply write [])
objective: position [or] elimination UNIT_LIST
(At least one list of units and their assigned behavior and target position, but there can be as many groups as there are units, as one unit can belong to two groups:)
UNIT_LIST:
- target position: (x, y) (The integer x and y coordinate on the map.)
- behavior: behavior_name target_1 target_2 ... target_n (where behavior_name is an available behavior and target_1 to target_n are the targeted unit types or just the keyword "any" if the behavior targets any unit_types)

A UNIT_LIST is the list of unit IDs, and it has the following format:
- Either it's the word "all" (without quotes), which means that all the units of the corresponding team are concerned.
- Or it's a list of IDs in the format "[X1, X2, ..., Xn]" where Xi can either be an integer or a slice "a:b" (with a and b as integers, b>a, a included and b not included like in Python's range function). If a is not specified (i.e., ":b") it is considered to be 0, and if b is not specified (i.e., "a:") it is considered to be the total number of agents in the considered team.

### IMPORTANT:
- All positions (x, y) must be integers. If you want to give float positions, convert them first into integers.
- Do not add comments to the plan specification, as it interferes with the parser. If you want to give comments, give them outside the "BEGIN PLAN" and "END PLAN".
- A unit can only belong to one group of units for the same step.

## Example of a Valid Detailed Plan:

BEGIN PLAN
Step 0:
prerequisites: []
objective: position
units: all
- target position: (24, 14)
- behavior: attack_and_move any

Step 1:
prerequisites: [0]
objective: position
units: [0,1,2,10:]
- target position: (24, 16)
- behavior: attack_and_move any
units: [10:15,30:]
- target position: (24, 14)
- behavior: attack_and_move any

Step 2:
prerequisites: [1]
objective: elimination [:15]
units: [:30]
- target position: (24, 24)
- behavior: attack_in_close_range archer spearmen
units: [30:60]
- target position: (24, 24)
- behavior: attack_in_long_range spearmen
END PLAN

## List of Planning Mistakes You Should Avoid:

Avoid creating a series of position objectives with different groups of units waiting for each other (through a chain of prerequisites). Instead, regroup those positions into one step so that all units can move simultaneously.

Ensure all units have assigned behaviors at every step. If two or more steps can be active simultaneously (because they share the same prerequisites), each unit must belong to at least one group.

For elimination objectives, ensure the target position is close enough to the targeted enemy units for effective engagement.

Elimination objectives already have a default target position, so avoid unnecessary position objectives before them. Instead, set the target position of the elimination objective to the same location.

Ensure the units’ IDs are enclosed in square brackets [ and ].

Use the correct type name for long-range units as "archer" (not "archers").

Verify the name of the unit behaviors (e.g., "attack_in_close_range") and ensure all units' target positions are integers.

Be sure to adapt this format and guidance as needed when responding to the player's requests.
)HIVE";

std::string number(double v) {
    if (v == std::floor(v) && std::abs(v) < 1e15) return std::to_string(static_cast<long long>(v));
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

std::string stat_line(const UnitType& t) {
    return std::string(kind_name(t.kind)) + ": Health=" + std::to_string(t.max_health) +
           "; Sight range=" + number(t.sight_range) + "; Attack range=" + number(t.attack_range) +
           "; Moving speed=" + number(t.speed) + "; Attack damage=" + std::to_string(t.damage) +
           "; Attack cooldown=" + std::to_string(t.cooldown) + "\n";
}

std::vector<RosterEntry> enemy_roster(const Scenario& s) {
    std::vector<RosterEntry> out;
    for (const auto& g : s.enemies) out.push_back(g.roster);
    return out;
}

}  // namespace

std::string markers_block(const std::vector<Marker>& markers) {
    if (markers.empty()) return {};
    std::string out = "Markers:\n";
    for (const auto& m : markers)
        out += m.label + " at (" + std::to_string(m.pos.x) + ", " + std::to_string(m.pos.y) + ")\n";
    return out;
}

std::string composition_lines(const std::vector<RosterEntry>& roster) {
    std::string out;
    int start = 0;
    for (std::size_t i = 0; i < roster.size();) {
        const UnitKind kind = roster[i].kind;
        int end = start;
        while (i < roster.size() && roster[i].kind == kind) end += roster[i++].count;
        if (end > start) out += "\t" + std::string(kind_name(kind)) + ": [" + std::to_string(start) + ":" + std::to_string(end) + "]\n";
        start = end;
    }
    return out;
}

std::string build_system_prompt(const Scenario& scenario, const std::vector<Marker>& markers) {
    std::string out;
    out.reserve(12000);
    out += kPreamble;
    out += "\n### Map of this scenario\n";
    out += describe_map(*scenario.map);
    if (!out.empty() && out.back() != '\n') out += '\n';
    out += kAfterMap;
    if (!markers.empty()) {
        out += kMarkersIntro;
        out += markers_block(markers);
        out += '\n';
    }
    out += kUnitsHead;
    for (UnitKind k : {UnitKind::Spearmen, UnitKind::Archer, UnitKind::Cavalry}) out += stat_line(scenario.types[k]);
    out += kMatchups;
    out += "Allies:\n" + composition_lines(scenario.allies);
    out += "Enemies:\n" + composition_lines(enemy_roster(scenario));
    out += kPlanSyntax;
    out += scenario.mission;
    if (!out.empty() && out.back() != '\n') out += '\n';
    return out;
}

std::string build_state_message(const GameState& state) {
    static constexpr std::string_view kDead = "∅";
    std::ostringstream out;
    out << "Health and positions of all the units of each team (" << kDead << " means that the unit is dead).\n";
    for (Team team : {Team::Ally, Team::Enemy}) {
        const auto& units = state.team(team);
        out << (team == Team::Ally ? "Allies:\n" : "Enemies:\n");
        auto list = [&](const char* title, auto value) {
            out << title << ": [";
            for (std::size_t i = 0; i < units.size(); ++i) {
                if (i) out << ", ";
                if (units[i].alive()) out << value(units[i]);
                else out << kDead;
            }
            out << "]\n";
        };
        list("Health", [](const Unit& u) { return u.health; });
        list("X positions", [](const Unit& u) { return std::lround(u.pos.x); });
        list("Y positions", [](const Unit& u) { return std::lround(u.pos.y); });
    }
    return out.str();
}

std::string build_user_message(const GameState& state, const std::string& prompt) {
    return build_state_message(state) + "\n" + prompt;
}

std::optional<std::string> extract_plan_text(std::string_view message) {
    int blocks = 0;
    auto block = plan::extract_plan_block(message, &blocks);
    if (blocks > 1) log::warn("assistant message holds " + std::to_string(blocks) + " plan blocks; using the first");
    return block;
}

}  // namespace hive::llm
