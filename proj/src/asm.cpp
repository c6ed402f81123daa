#include "rmi/asm.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <sstream>

namespace rmi {

namespace {

constexpr std::array<std::string_view, kNumRegs> kAbiNames = {
    "zero", "ra", "sp", "gp", "tp", "t0", "t1", "t2", "s0", "s1", "a0",
    "a1",   "a2", "a3", "a4", "a5", "a6", "a7", "s2", "s3", "s4", "s5",
    "s6",   "s7", "s8", "s9", "s10", "s11", "t3", "t4", "t5", "t6",
};

struct MnemonicEntry {
    std::string_view text;
    Opcode op;
};

constexpr std::array<MnemonicEntry, 23> kMnemonics = {{
    {"lw", Opcode::lw},     {"lbu", Opcode::lbu},   {"ld", Opcode::ld},     {"sw", Opcode::sw},
    {"sb", Opcode::sb},     {"sd", Opcode::sd},     {"add", Opcode::add},   {"addi", Opcode::addi},
    {"sub", Opcode::sub},   {"and", Opcode::and_},  {"or", Opcode::or_},    {"xor", Opcode::xor_},
    {"slli", Opcode::slli}, {"srli", Opcode::srli}, {"li", Opcode::li},     {"mv", Opcode::mv},
    {"beq", Opcode::beq},   {"bne", Opcode::bne},   {"blt", Opcode::blt},   {"bgeu", Opcode::bgeu},
    {"jal", Opcode::jal},   {"jalr", Opcode::jalr}, {"csrwi", Opcode::csrwi},
}};

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

bool is_ident_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '.';
}

bool is_ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '$';
}

bool is_identifier(std::string_view s) {
    if (s.empty() || !is_ident_start(s.front())) return false;
    return std::all_of(s.begin(), s.end(), is_ident_char);
}

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

// One source line being decoded; tracks the column origin for error reports.
struct LineCursor {
    int line;
    std::string_view full;

    int column_of(std::string_view part) const {
        if (part.data() >= full.data() && part.data() <= full.data() + full.size())
            return static_cast<int>(part.data() - full.data()) + 1;
        return 1;
    }
};

class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    Program run() {
        std::size_t pos = 0;
        int line_no = 0;
        while (pos <= text_.size()) {
            const auto nl = text_.find('\n', pos);
            const auto end = nl == std::string_view::npos ? text_.size() : nl;
            ++line_no;
            parse_line(line_no, text_.substr(pos, end - pos));
            if (nl == std::string_view::npos) break;
            pos = nl + 1;
        }
        resolve_labels();
        extract_regions();
        return std::move(program_);
    }

private:
    [[noreturn]] void fail(ParseError::Kind kind, const LineCursor& cur, std::string_view at,
                           std::string message, std::string name = {}) {
        throw ParseError(kind, cur.line, cur.column_of(at), std::move(message), std::move(name));
    }

    void parse_line(int line_no, std::string_view raw) {
        if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
        LineCursor cur{line_no, raw};
        std::string_view body = raw;
        if (const auto hash = body.find('#'); hash != std::string_view::npos) body = body.substr(0, hash);
        body = trim(body);

        // Leading "label:" definitions, possibly followed by an instruction.
        while (!body.empty()) {
            const auto colon = body.find(':');
            if (colon == std::string_view::npos) break;
            const auto name = trim(body.substr(0, colon));
            if (!is_identifier(name)) break;
            if (program_.labels.count(std::string(name)) != 0)
                fail(ParseError::Kind::malformed_operand, cur, name,
                     "duplicate label '" + std::string(name) + "'");
            program_.labels.emplace(std::string(name), program_.instructions.size());
            body = trim(body.substr(colon + 1));
        }
        if (body.empty()) return;

        if (body.front() == '.') {
            parse_directive(cur, body);
            return;
        }
        parse_instruction(cur, body);
    }

    void parse_directive(const LineCursor& cur, std::string_view body) {
        auto space = body.find_first_of(" \t");
        const auto name = body.substr(0, space);
        if (name == ".symbol") {
            const auto rest = trim(space == std::string_view::npos ? std::string_view{} : body.substr(space));
            const auto eq = rest.find('=');
            if (eq == std::string_view::npos)
                fail(ParseError::Kind::malformed_operand, cur, rest, "expected '.symbol name = value'");
            const auto sym = trim(rest.substr(0, eq));
            const auto value_text = trim(rest.substr(eq + 1));
            if (!is_identifier(sym))
                fail(ParseError::Kind::malformed_operand, cur, sym, "bad symbol name");
            const auto value = parse_integer(value_text);
            if (!value)
                fail(ParseError::Kind::malformed_operand, cur, value_text, "bad symbol value");
            program_.symbols[std::string(sym)] = *value;
            return;
        }
        program_.warnings.push_back(
            {cur.line, cur.column_of(name), "directive '" + std::string(name) + "' ignored"});
    }

    static std::optional<std::int64_t> parse_integer(std::string_view s) {
        s = trim(s);
        if (s.empty()) return std::nullopt;
        bool negative = false;
        if (s.front() == '-' || s.front() == '+') {
            negative = s.front() == '-';
            s.remove_prefix(1);
        }
        int base = 10;
        if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
            base = 16;
            s.remove_prefix(2);
        }
        if (s.empty()) return std::nullopt;
        std::uint64_t magnitude = 0;
        const auto* first = s.data();
        const auto* last = s.data() + s.size();
        auto [ptr, ec] = std::from_chars(first, last, magnitude, base);
        if (ec != std::errc{} || ptr != last) return std::nullopt;
        const auto value = static_cast<std::int64_t>(magnitude);
        return negative ? -value : value;
    }

    std::optional<std::int64_t> immediate(std::string_view s) const {
        s = trim(s);
        if (auto v = parse_integer(s)) return v;
        if (auto it = program_.symbols.find(std::string(s)); it != program_.symbols.end()) return it->second;
        return std::nullopt;
    }

    static std::vector<std::string_view> split_operands(std::string_view s) {
        std::vector<std::string_view> out;
        s = trim(s);
        if (s.empty()) return out;
        std::size_t start = 0;
        for (std::size_t i = 0; i <= s.size(); ++i) {
            if (i == s.size() || s[i] == ',') {
                out.push_back(trim(s.substr(start, i - start)));
                start = i + 1;
            }
        }
        return out;
    }

    Reg reg_operand(const LineCursor& cur, std::string_view s) {
        if (auto r = parse_reg(trim(s))) return *r;
        fail(ParseError::Kind::malformed_operand, cur, s, "expected register, got '" + std::string(s) + "'");
    }

    std::int64_t imm_operand(const LineCursor& cur, std::string_view s) {
        if (auto v = immediate(s)) return *v;
        fail(ParseError::Kind::malformed_operand, cur, s, "expected immediate, got '" + std::string(s) + "'");
    }

    // "off(reg)", "(reg)" or "sym(reg)".
    std::pair<std::int64_t, Reg> mem_operand(const LineCursor& cur, std::string_view s) {
        s = trim(s);
        const auto open = s.find('(');
        const auto close = s.rfind(')');
        if (open == std::string_view::npos || close == std::string_view::npos || close < open ||
            close != s.size() - 1)
            fail(ParseError::Kind::malformed_operand, cur, s, "expected offset(register)");
        const auto off_text = trim(s.substr(0, open));
        std::int64_t offset = 0;
        if (!off_text.empty()) offset = imm_operand(cur, off_text);
        const Reg base = reg_operand(cur, s.substr(open + 1, close - open - 1));
        return {offset, base};
    }

    std::string label_operand(const LineCursor& cur, std::string_view s) {
        s = trim(s);
        if (!is_identifier(s))
            fail(ParseError::Kind::malformed_operand, cur, s, "expected label, got '" + std::string(s) + "'");
        return std::string(s);
    }

    void expect_count(const LineCursor& cur, std::string_view at, const std::vector<std::string_view>& ops,
                      std::size_t n) {
        if (ops.size() != n)
            fail(ParseError::Kind::malformed_operand, cur, at,
                 "expected " + std::to_string(n) + " operand(s), got " + std::to_string(ops.size()));
    }

    void parse_instruction(const LineCursor& cur, std::string_view body) {
        const auto space = body.find_first_of(" \t");
        const auto mnem_text = body.substr(0, space);
        const auto rest = space == std::string_view::npos ? std::string_view{} : body.substr(space);
        const auto ops = split_operands(rest);
        const auto mnem = lower(mnem_text);

        Instruction inst;
        inst.source_line = cur.line;

        if (mnem == "ret") {
            expect_count(cur, body, ops, 0);
            inst.op = Opcode::jalr;
            inst.rd = kZero;
            inst.rs1 = kRa;
            program_.instructions.push_back(std::move(inst));
            return;
        }

        const auto op = opcode_from_mnemonic(mnem);
        if (!op)
            fail(ParseError::Kind::unknown_mnemonic, cur, mnem_text,
                 "unknown mnemonic '" + std::string(mnem_text) + "'");
        inst.op = *op;

        switch (*op) {
            case Opcode::lw:
            case Opcode::lbu:
            case Opcode::ld: {
                expect_count(cur, body, ops, 2);
                inst.rd = reg_operand(cur, ops[0]);
                std::tie(inst.imm, inst.rs1) = mem_operand(cur, ops[1]);
                break;
            }
            case Opcode::sw:
            case Opcode::sb:
            case Opcode::sd: {
                expect_count(cur, body, ops, 2);
                inst.rs2 = reg_operand(cur, ops[0]);
                std::tie(inst.imm, inst.rs1) = mem_operand(cur, ops[1]);
                break;
            }
            case Opcode::add: {
                expect_count(cur, body, ops, 3);
                inst.rd = reg_operand(cur, ops[0]);
                inst.rs1 = reg_operand(cur, ops[1]);
                if (auto r = parse_reg(ops[2])) {
                    inst.rs2 = *r;
                } else {
                    // GNU as accepts "add rd, rs, imm" as addi.
                    inst.op = Opcode::addi;
                    inst.imm = imm_operand(cur, ops[2]);
                }
                break;
            }
            case Opcode::sub:
            case Opcode::and_:
            case Opcode::or_:
            case Opcode::xor_: {
                expect_count(cur, body, ops, 3);
                inst.rd = reg_operand(cur, ops[0]);
                inst.rs1 = reg_operand(cur, ops[1]);
                inst.rs2 = reg_operand(cur, ops[2]);
                break;
            }
            case Opcode::addi: {
                expect_count(cur, body, ops, 3);
                inst.rd = reg_operand(cur, ops[0]);
                inst.rs1 = reg_operand(cur, ops[1]);
                inst.imm = imm_operand(cur, ops[2]);
                break;
            }
            case Opcode::slli:
            case Opcode::srli: {
                expect_count(cur, body, ops, 3);
                inst.rd = reg_operand(cur, ops[0]);
                inst.rs1 = reg_operand(cur, ops[1]);
                inst.imm = imm_operand(cur, ops[2]);
                if (inst.imm < 0 || inst.imm > 63)
                    fail(ParseError::Kind::malformed_operand, cur, ops[2], "shift amount out of range");
                break;
            }
            case Opcode::li: {
                expect_count(cur, body, ops, 2);
                inst.rd = reg_operand(cur, ops[0]);
                inst.imm = imm_operand(cur, ops[1]);
                break;
            }
            case Opcode::mv: {
                expect_count(cur, body, ops, 2);
                inst.rd = reg_operand(cur, ops[0]);
                inst.rs1 = reg_operand(cur, ops[1]);
                break;
            }
            case Opcode::beq:
            case Opcode::bne:
            case Opcode::blt:
            case Opcode::bgeu: {
                expect_count(cur, body, ops, 3);
                inst.rs1 = reg_operand(cur, ops[0]);
                inst.rs2 = reg_operand(cur, ops[1]);
                inst.label = label_operand(cur, ops[2]);
                break;
            }
            case Opcode::jal: {
                if (ops.size() == 1) {
                    inst.rd = kRa;
                    inst.label = label_operand(cur, ops[0]);
                } else {
                    expect_count(cur, body, ops, 2);
                    inst.rd = reg_operand(cur, ops[0]);
                    inst.label = label_operand(cur, ops[1]);
                }
                break;
            }
            case Opcode::jalr: {
                if (ops.size() == 1) {
                    inst.rd = kRa;
                    inst.rs1 = reg_operand(cur, ops[0]);
                } else if (ops.size() == 2) {
                    inst.rd = reg_operand(cur, ops[0]);
                    std::tie(inst.imm, inst.rs1) = mem_operand(cur, ops[1]);
                } else {
                    expect_count(cur, body, ops, 3);
                    inst.rd = reg_operand(cur, ops[0]);
                    inst.rs1 = reg_operand(cur, ops[1]);
                    inst.imm = imm_operand(cur, ops[2]);
                }
                break;
            }
            case Opcode::csrwi: {
                expect_count(cur, body, ops, 2);
                if (ops[0] != "MSPEC")
                    fail(ParseError::Kind::malformed_operand, cur, ops[0], "csrwi only targets MSPEC");
                if (ops[1] == "BURST_ON") {
                    inst.marker = BurstMarker::on;
                } else if (ops[1] == "BURST_OFF") {
                    inst.marker = BurstMarker::off;
                } else {
                    fail(ParseError::Kind::malformed_operand, cur, ops[1],
                         "MSPEC accepts BURST_ON or BURST_OFF");
                }
                break;
            }
        }
        program_.instructions.push_back(std::move(inst));
    }

    void resolve_labels() {
        for (auto& inst : program_.instructions) {
            if (inst.label.empty()) continue;
            const auto it = program_.labels.find(inst.label);
            if (it == program_.labels.end())
                throw ParseError(ParseError::Kind::unresolved_label, inst.source_line, 1,
                                 "unresolved label '" + inst.label + "'", inst.label);
            inst.target = it->second;
        }
    }

    void extract_regions() {
        std::optional<std::size_t> open;
        for (std::size_t i = 0; i < program_.instructions.size(); ++i) {
            const auto& inst = program_.instructions[i];
            if (inst.op != Opcode::csrwi) continue;
            if (inst.marker == BurstMarker::on) {
                if (open)
                    throw ParseError(ParseError::Kind::unmatched_burst_marker, inst.source_line, 1,
                                     "BURST_ON while a burst region is already open", {}, i);
                open = i;
            } else {
                if (!open)
                    throw ParseError(ParseError::Kind::unmatched_burst_marker, inst.source_line, 1,
                                     "BURST_OFF without a matching BURST_ON", {}, i);
                program_.burst_regions.push_back({*open, i});
                open.reset();
            }
        }
        if (open) {
            const auto& inst = program_.instructions[*open];
            throw ParseError(ParseError::Kind::unmatched_burst_marker, inst.source_line, 1,
                             "BURST_ON is never closed", {}, *open);
        }
    }

    std::string_view text_;
    Program program_;
};

}  // namespace

std::string_view mnemonic(Opcode op) {
    for (const auto& e : kMnemonics)
        if (e.op == op) return e.text;
    return "?";
}

std::optional<Opcode> opcode_from_mnemonic(std::string_view text) {
    for (const auto& e : kMnemonics)
        if (e.text == text) return e.op;
    return std::nullopt;
}

std::string_view reg_name(Reg r) { return r < kNumRegs ? kAbiNames[r] : std::string_view{"?"}; }

std::optional<Reg> parse_reg(std::string_view text) {
    text = trim(text);
    if (text == "fp") return Reg{8};
    for (std::size_t i = 0; i < kAbiNames.size(); ++i)
        if (kAbiNames[i] == text) return static_cast<Reg>(i);
    if (text.size() >= 2 && text.size() <= 3 && text[0] == 'x') {
        unsigned n = 0;
        auto [ptr, ec] = std::from_chars(text.data() + 1, text.data() + text.size(), n);
        if (ec == std::errc{} && ptr == text.data() + text.size() && n < kNumRegs &&
            !(text.size() == 3 && text[1] == '0'))
            return static_cast<Reg>(n);
    }
    return std::nullopt;
}

bool is_load(Opcode op) { return op == Opcode::lw || op == Opcode::lbu || op == Opcode::ld; }
bool is_store(Opcode op) { return op == Opcode::sw || op == Opcode::sb || op == Opcode::sd; }

bool is_cond_branch(Opcode op) {
    return op == Opcode::beq || op == Opcode::bne || op == Opcode::blt || op == Opcode::bgeu;
}

bool is_control(Opcode op) { return is_cond_branch(op) || op == Opcode::jal || op == Opcode::jalr; }

unsigned access_width(Opcode op) {
    switch (op) {
        case Opcode::lbu:
        case Opcode::sb: return 1;
        case Opcode::lw:
        case Opcode::sw: return 4;
        case Opcode::ld:
        case Opcode::sd: return 8;
        default: return 0;
    }
}

std::vector<Reg> Instruction::sources() const {
    switch (op) {
        case Opcode::lw:
        case Opcode::lbu:
        case Opcode::ld:
        case Opcode::addi:
        case Opcode::slli:
        case Opcode::srli:
        case Opcode::mv:
        case Opcode::jalr: return {rs1};
        case Opcode::sw:
        case Opcode::sb:
        case Opcode::sd:
        case Opcode::add:
        case Opcode::sub:
        case Opcode::and_:
        case Opcode::or_:
        case Opcode::xor_:
        case Opcode::beq:
        case Opcode::bne:
        case Opcode::blt:
        case Opcode::bgeu: return {rs1, rs2};
        case Opcode::li:
        case Opcode::jal:
        case Opcode::csrwi: return {};
    }
    return {};
}

std::optional<Reg> Instruction::dest() const {
    switch (op) {
        case Opcode::sw:
        case Opcode::sb:
        case Opcode::sd:
        case Opcode::beq:
        case Opcode::bne:
        case Opcode::blt:
        case Opcode::bgeu:
        case Opcode::csrwi: return std::nullopt;
        default: break;
    }
    if (rd == kZero) return std::nullopt;
    return rd;
}

bool Instruction::same_as(const Instruction& o) const {
    return op == o.op && rd == o.rd && rs1 == o.rs1 && rs2 == o.rs2 && imm == o.imm && label == o.label &&
           target == o.target && (op != Opcode::csrwi || marker == o.marker);
}

std::optional<BurstRegion> Program::region_of(std::size_t index) const {
    for (const auto& r : burst_regions)
        if (r.contains(index)) return r;
    return std::nullopt;
}

bool Program::same_as(const Program& o) const {
    if (instructions.size() != o.instructions.size()) return false;
    for (std::size_t i = 0; i < instructions.size(); ++i)
        if (!instructions[i].same_as(o.instructions[i])) return false;
    return labels == o.labels && burst_regions == o.burst_regions;
}

ParseError::ParseError(Kind kind, int line, int column, std::string message, std::string name,
                       std::size_t index)
    : std::runtime_error("line " + std::to_string(line) + ":" + std::to_string(column) + ": " + message),
      kind_(kind),
      line_(line),
      column_(column),
      name_(std::move(name)),
      index_(index) {}

std::string_view ParseError::kind_name() const {
    switch (kind_) {
        case Kind::unknown_mnemonic: return "UnknownMnemonic";
        case Kind::unresolved_label: return "UnresolvedLabel";
        case Kind::malformed_operand: return "MalformedOperand";
        case Kind::unmatched_burst_marker: return "UnmatchedBurstMarker";
    }
    return "ParseError";
}

Program parse_program(std::string_view text) { return Parser(text).run(); }

std::string format_instruction(const Instruction& inst) {
    std::ostringstream os;
    os << mnemonic(inst.op);
    const auto r = [](Reg x) { return reg_name(x); };
    switch (inst.op) {
        case Opcode::lw:
        case Opcode::lbu:
        case Opcode::ld: os << ' ' << r(inst.rd) << ", " << inst.imm << '(' << r(inst.rs1) << ')'; break;
        case Opcode::sw:
        case Opcode::sb:
        case Opcode::sd: os << ' ' << r(inst.rs2) << ", " << inst.imm << '(' << r(inst.rs1) << ')'; break;
        case Opcode::add:
        case Opcode::sub:
        case Opcode::and_:
        case Opcode::or_:
        case Opcode::xor_: os << ' ' << r(inst.rd) << ", " << r(inst.rs1) << ", " << r(inst.rs2); break;
        case Opcode::addi:
        case Opcode::slli:
        case Opcode::srli: os << ' ' << r(inst.rd) << ", " << r(inst.rs1) << ", " << inst.imm; break;
        case Opcode::li: os << ' ' << r(inst.rd) << ", " << inst.imm; break;
        case Opcode::mv: os << ' ' << r(inst.rd) << ", " << r(inst.rs1); break;
        case Opcode::beq:
        case Opcode::bne:
        case Opcode::blt:
        case Opcode::bgeu: os << ' ' << r(inst.rs1) << ", " << r(inst.rs2) << ", " << inst.label; break;
        case Opcode::jal: os << ' ' << r(inst.rd) << ", " << inst.label; break;
        case Opcode::jalr: os << ' ' << r(inst.rd) << ", " << inst.imm << '(' << r(inst.rs1) << ')'; break;
        case Opcode::csrwi:
            os << " MSPEC, " << (inst.marker == BurstMarker::on ? "BURST_ON" : "BURST_OFF");
            break;
    }
    return os.str();
}

std::string pretty_print(const Program& program) {
    std::multimap<std::size_t, std::string> labels_at;
    for (const auto& [name, index] : program.labels) labels_at.emplace(index, name);
    std::ostringstream os;
    for (std::size_t i = 0; i <= program.instructions.size(); ++i) {
        auto [lo, hi] = labels_at.equal_range(i);
        for (auto it = lo; it != hi; ++it) os << it->second << ":\n";
        if (i < program.instructions.size()) os << "  " << format_instruction(program.instructions[i]) << '\n';
    }
    return os.str();
}

std::uint64_t fingerprint(const Program& program) {
    // FNV-1a over the canonical text; std::hash is not stable across builds.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : pretty_print(program)) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace rmi
