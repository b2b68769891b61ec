// Recursive-descent parser and printer for the behaviour-tree text format:
//
//   node   := "S" "(" nodes ")" | "F" "(" nodes ")" | "A" "(" atomic ")" | "C" "(" atomic ")"
//   nodes  := node (("::" | "|>") node)*
//
// Atomics are keyword-led; see parse_atomic.

#include <algorithm>
#include <cctype>
#include <sstream>

#include "hive/bt.hpp"

namespace hive::bt {

ParseError::ParseError(const std::string& message, int line, int column, std::vector<std::string> expected)
    : std::runtime_error(message), line_(line), column_(column), expected_(std::move(expected)) {}

bool UnitFilter::matches(UnitKind k) const {
    return kinds.empty() || std::find(kinds.begin(), kinds.end(), k) != kinds.end();
}

namespace {

struct Token {
    enum class Kind { Word, LParen, RParen, Separator, End };
    Kind kind;
    std::string text;
    int line;
    int column;
};

std::vector<Token> tokenize(std::string_view src) {
    std::vector<Token> out;
    int line = 1;
    int col = 1;
    std::size_t i = 0;
    auto advance = [&](std::size_t n) {
        for (std::size_t k = 0; k < n; ++k) {
            if (src[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
            ++i;
        }
    };
    while (i < src.size()) {
        const char c = src[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            advance(1);
        } else if (c == '(') {
            out.push_back({Token::Kind::LParen, "(", line, col});
            advance(1);
        } else if (c == ')') {
            out.push_back({Token::Kind::RParen, ")", line, col});
            advance(1);
        } else if (src.substr(i, 2) == "::" || src.substr(i, 2) == "|>") {
            out.push_back({Token::Kind::Separator, std::string(src.substr(i, 2)), line, col});
            advance(2);
        } else if (std::isalnum(static_cast<unsigned char>(c)) || c == '_') {
            const int l = line;
            const int cc = col;
            std::size_t j = i;
            while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_')) ++j;
            out.push_back({Token::Kind::Word, std::string(src.substr(i, j - i)), l, cc});
            advance(j - i);
        } else {
            throw ParseError("unexpected character '" + std::string(1, c) + "'", line, col, {});
        }
    }
    out.push_back({Token::Kind::End, "<end>", line, col});
    return out;
}

template <class E>
struct Terminal {
    std::string_view word;
    E value;
};

constexpr Terminal<Side> kSides[] = {{"foe", Side::Foe}, {"friend", Side::Friend}};
constexpr Terminal<Sense> kSenses[] = {{"toward", Sense::Toward}, {"away_from", Sense::AwayFrom}};
constexpr Terminal<Qualifier> kQualifiers[] = {{"strongest", Qualifier::Strongest},
                                               {"weakest", Qualifier::Weakest},
                                               {"closest", Qualifier::Closest},
                                               {"farthest", Qualifier::Farthest},
                                               {"random", Qualifier::Random}};
constexpr Terminal<Direction> kDirections[] = {{"north", Direction::North},
                                               {"east", Direction::East},
                                               {"south", Direction::South},
                                               {"west", Direction::West},
                                               {"center", Direction::Center}};
constexpr Terminal<Intensity> kIntensities[] = {
    {"low", Intensity::Low}, {"middle", Intensity::Middle}, {"high", Intensity::High}};
constexpr Terminal<Horizon> kHorizons[] = {
    {"now", Horizon::Now}, {"low", Horizon::Low}, {"middle", Horizon::Middle}, {"high", Horizon::High}};
constexpr Terminal<Source> kSources[] = {{"them_from_me", Source::ThemFromMe}, {"me_from_them", Source::MeFromThem}};
constexpr Terminal<Subject> kSubjects[] = {
    {"self", Subject::Self}, {"foe", Subject::Foe}, {"friend", Subject::Friend}};
constexpr Terminal<bool> kNegations[] = {{"a", false}, {"not_a", true}};

template <class E, std::size_t N>
std::string_view word_of(const Terminal<E> (&table)[N], E value) {
    for (const auto& t : table)
        if (t.value == value) return t.word;
    return "?";
}

class Parser {
public:
    explicit Parser(std::string_view text) : tokens_(tokenize(text)) {}

    ParseOutput run() {
        Node root = node();
        if (peek().kind != Token::Kind::End) fail({"<end>"});
        return {std::move(root), std::move(warnings_)};
    }

private:
    const Token& peek() const { return tokens_[pos_]; }
    const Token& take() { return tokens_[pos_++]; }

    [[noreturn]] void fail(std::vector<std::string> expected) const {
        const Token& t = peek();
        std::string msg = "syntax error at " + std::to_string(t.line) + ":" + std::to_string(t.column) +
                          ": unexpected '" + t.text + "', expected one of:";
        for (const auto& e : expected) msg += " " + e;
        throw ParseError(msg, t.line, t.column, std::move(expected));
    }

    void expect(Token::Kind kind, std::string_view text) {
        if (peek().kind != kind) fail({std::string(text)});
        ++pos_;
    }

    Node node() {
        const Token& t = peek();
        if (t.kind != Token::Kind::Word || (t.text != "S" && t.text != "F" && t.text != "A" && t.text != "C")) {
            fail({"S", "F", "A", "C"});
        }
        const std::string head = take().text;
        expect(Token::Kind::LParen, "(");
        Node n;
        if (head == "S" || head == "F") {
            n.kind = head == "S" ? Node::Kind::Sequence : Node::Kind::Fallback;
            n.children.push_back(node());
            while (peek().kind == Token::Kind::Separator) {
                ++pos_;
                n.children.push_back(node());
            }
            if (peek().kind != Token::Kind::RParen) fail({"::", "|>", ")"});
        } else {
            n.kind = head == "A" ? Node::Kind::Action : Node::Kind::Condition;
            n.atomic = atomic();
        }
        expect(Token::Kind::RParen, ")");
        return n;
    }

    template <class E, std::size_t N>
    E terminal(const Terminal<E> (&table)[N]) {
        if (peek().kind == Token::Kind::Word) {
            for (const auto& t : table) {
                if (peek().text == t.word) {
                    ++pos_;
                    return t.value;
                }
            }
        }
        std::vector<std::string> expected;
        for (const auto& t : table) expected.emplace_back(t.word);
        fail(std::move(expected));
    }

    template <class E, std::size_t N>
    bool at_terminal(const Terminal<E> (&table)[N]) const {
        if (peek().kind != Token::Kind::Word) return false;
        return std::any_of(std::begin(table), std::end(table), [&](const auto& t) { return peek().text == t.word; });
    }

    UnitKind unit() {
        if (peek().kind == Token::Kind::Word) {
            if (auto k = kind_from_name(peek().text)) {
                if (!is_shipped(*k)) {
                    warnings_.push_back("unit kind '" + peek().text + "' at " + std::to_string(peek().line) + ":" +
                                        std::to_string(peek().column) + " has no shipped stats");
                }
                ++pos_;
                return *k;
            }
        }
        fail({"spearmen", "archer", "cavalry", "balista", "dragon", "civilian"});
    }

    bool at_unit() const { return peek().kind == Token::Kind::Word && kind_from_name(peek().text).has_value(); }

    // (unit ("or" unit)* | any)?
    UnitFilter optional_filter() {
        UnitFilter f;
        if (peek().kind == Token::Kind::Word && peek().text == "any") {
            ++pos_;
            return f;
        }
        if (!at_unit()) return f;
        f.kinds.push_back(unit());
        while (peek().kind == Token::Kind::Word && peek().text == "or") {
            ++pos_;
            f.kinds.push_back(unit());
        }
        return f;
    }

    Atomic atomic() {
        const Token& t = peek();
        if (t.kind != Token::Kind::Word) fail(atomic_names());
        const std::string name = take().text;
        if (name == "move") {
            if (at_terminal(kDirections)) return MoveDirection{terminal(kDirections)};
            if (!at_terminal(kSenses)) {
                std::vector<std::string> expected = {"north", "east", "south", "west", "center", "toward", "away_from"};
                fail(std::move(expected));
            }
            MoveRelative m{};
            m.sense = terminal(kSenses);
            m.qualifier = terminal(kQualifiers);
            m.side = terminal(kSides);
            m.filter = optional_filter();
            return m;
        }
        if (name == "attack") {
            AttackAtom a{};
            a.qualifier = terminal(kQualifiers);
            a.filter = optional_filter();
            return a;
        }
        if (name == "stand") return Stand{};
        if (name == "follow_map") {
            FollowMap f{};
            f.sense = terminal(kSenses);
            if (at_terminal(kIntensities)) f.intensity = terminal(kIntensities);
            return f;
        }
        if (name == "in_sight") {
            InSight s{};
            s.side = terminal(kSides);
            s.filter = optional_filter();
            return s;
        }
        if (name == "in_reach") {
            InReach r{};
            r.side = terminal(kSides);
            r.source = terminal(kSources);
            r.horizon = terminal(kHorizons);
            r.filter = optional_filter();
            return r;
        }
        if (name == "is_dying") {
            IsDying d{};
            d.subject = terminal(kSubjects);
            d.intensity = terminal(kIntensities);
            return d;
        }
        if (name == "is_armed") return IsArmed{terminal(kSubjects)};
        if (name == "is_flock") {
            IsFlock f{};
            f.side = terminal(kSides);
            f.direction = terminal(kDirections);
            return f;
        }
        if (name == "is_type") {
            IsType ty{};
            ty.negated = terminal(kNegations);
            ty.kind = unit();
            return ty;
        }
        if (name == "is_in_forest") return IsInForest{};
        if (name == "success_action") return SuccessAction{};
        if (name == "failure_action") return FailureAction{};
        --pos_;
        const Token& bad = peek();
        throw ParseError("unknown atomic '" + name + "' at " + std::to_string(bad.line) + ":" +
                             std::to_string(bad.column),
                         bad.line, bad.column, atomic_names());
    }

    static std::vector<std::string> atomic_names() {
        return {"move",     "attack",   "stand",    "follow_map", "in_sight",     "in_reach",       "is_dying",
                "is_armed", "is_flock", "is_type",  "is_in_forest", "success_action", "failure_action"};
    }

    std::vector<Token> tokens_;
    std::size_t pos_ = 0;
    std::vector<std::string> warnings_;
};

std::string filter_text(const UnitFilter& f) {
    if (f.is_any()) return "any";
    std::string out;
    for (std::size_t i = 0; i < f.kinds.size(); ++i) {
        if (i) out += " or ";
        out += kind_name(f.kinds[i]);
    }
    return out;
}

struct AtomicPrinter {
    std::string operator()(const MoveDirection& m) const { return "move " + std::string(word_of(kDirections, m.direction)); }
    std::string operator()(const MoveRelative& m) const {
        return "move " + std::string(word_of(kSenses, m.sense)) + " " + std::string(word_of(kQualifiers, m.qualifier)) +
               " " + std::string(word_of(kSides, m.side)) + " " + filter_text(m.filter);
    }
    std::string operator()(const AttackAtom& a) const {
        return "attack " + std::string(word_of(kQualifiers, a.qualifier)) + " " + filter_text(a.filter);
    }
    std::string operator()(const Stand&) const { return "stand"; }
    std::string operator()(const FollowMap& f) const {
        std::string s = "follow_map " + std::string(word_of(kSenses, f.sense));
        if (f.intensity) s += " " + std::string(word_of(kIntensities, *f.intensity));
        return s;
    }
    std::string operator()(const InSight& s) const {
        return "in_sight " + std::string(word_of(kSides, s.side)) + " " + filter_text(s.filter);
    }
    std::string operator()(const InReach& r) const {
        return "in_reach " + std::string(word_of(kSides, r.side)) + " " + std::string(word_of(kSources, r.source)) +
               " " + std::string(word_of(kHorizons, r.horizon)) + " " + filter_text(r.filter);
    }
    std::string operator()(const IsDying& d) const {
        return "is_dying " + std::string(word_of(kSubjects, d.subject)) + " " +
               std::string(word_of(kIntensities, d.intensity));
    }
    std::string operator()(const IsArmed& a) const { return "is_armed " + std::string(word_of(kSubjects, a.subject)); }
    std::string operator()(const IsFlock& f) const {
        return "is_flock " + std::string(word_of(kSides, f.side)) + " " + std::string(word_of(kDirections, f.direction));
    }
    std::string operator()(const IsType& t) const {
        return "is_type " + std::string(word_of(kNegations, t.negated)) + " " + std::string(kind_name(t.kind));
    }
    std::string operator()(const IsInForest&) const { return "is_in_forest"; }
    std::string operator()(const SuccessAction&) const { return "success_action"; }
    std::string operator()(const FailureAction&) const { return "failure_action"; }
};

void print_into(const Node& n, std::string& out) {
    switch (n.kind) {
        case Node::Kind::Sequence:
        case Node::Kind::Fallback:
            out += n.kind == Node::Kind::Sequence ? "S(" : "F(";
            for (std::size_t i = 0; i < n.children.size(); ++i) {
                if (i) out += " :: ";
                print_into(n.children[i], out);
            }
            out += ")";
            break;
        case Node::Kind::Condition:
        case Node::Kind::Action:
            out += n.kind == Node::Kind::Condition ? "C(" : "A(";
            out += print_atomic(n.atomic);
            out += ")";
            break;
    }
}

}  // namespace

ParseOutput parse_with_warnings(std::string_view text) { return Parser(text).run(); }

Node parse_bt(std::string_view text) { return parse_with_warnings(text).root; }

std::string print_atomic(const Atomic& atomic) { return std::visit(AtomicPrinter{}, atomic); }

std::string print_bt(const Node& node) {
    std::string out;
    print_into(node, out);
    return out;
}

std::size_t tree_size(const Node& node) {
    std::size_t n = 1;
    for (const auto& c : node.children) n += tree_size(c);
    return n;
}

const std::map<std::string, std::string, std::less<>>& library_sources() {
    static const std::map<std::string, std::string, std::less<>> sources = {
        {std::string(kLongRange),
         "F(S(C( in_reach foe me_from_them high any) :: A (move away_from closest foe any)) :: A (attack random any) "
         "::  A (follow_map toward))"},
        {std::string(kCloseRange),
         "F( A (attack random any) :: A (move toward closest foe any) :: A (follow_map toward))"},
        {std::string(kAttackAndMove),
         "F( A (attack random any) :: A (follow_map toward low) :: A (move toward closest foe any) )"},
        {std::string(kMoveToTarget), "A (follow_map toward)"},
        {std::string(kStand), "A (stand)"},
        {std::string(kLongRangeNoForest),
         "F (S (C (is_in_forest) :: A (follow_map toward)) :: S(C( in_reach foe me_from_them high any) :: A (move "
         "away_from closest foe any)) :: A (attack closest any))"},
        {std::string(kCloseRangeNoForest),
         "F (S (C (is_in_forest) :: A (follow_map toward)) :: A (attack closest any) :: A (move toward closest foe "
         "any))"},
    };
    return sources;
}

const std::map<std::string, std::shared_ptr<const Node>, std::less<>>& standard_library() {
    static const auto library = [] {
        std::map<std::string, std::shared_ptr<const Node>, std::less<>> lib;
        for (const auto& [name, text] : library_sources()) {
            lib.emplace(name, std::make_shared<const Node>(parse_bt(text)));
        }
        return lib;
    }();
    return library;
}

Node substitute_targets(const Node& tree, const UnitFilter& filter) {
    Node out = tree;
    if (out.kind == Node::Kind::Sequence || out.kind == Node::Kind::Fallback) {
        for (auto& c : out.children) c = substitute_targets(c, filter);
        return out;
    }
    std::visit(
        [&](auto& a) {
            using T = std::decay_t<decltype(a)>;
            if constexpr (std::is_same_v<T, AttackAtom>) {
                if (a.filter.is_any()) a.filter = filter;
            } else if constexpr (std::is_same_v<T, InSight> || std::is_same_v<T, InReach> ||
                                 std::is_same_v<T, MoveRelative>) {
                if (a.side == Side::Foe && a.filter.is_any()) a.filter = filter;
            }
        },
        out.atomic);
    return out;
}

}  // namespace hive::bt
