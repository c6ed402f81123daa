#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace rmi {

using Reg = std::uint8_t;

inline constexpr Reg kZero = 0;
inline constexpr Reg kRa = 1;
inline constexpr std::size_t kNumRegs = 32;

enum class Opcode {
    lw, lbu, ld, sw, sb, sd,
    add, addi, sub, and_, or_, xor_, slli, srli,
    li, mv,
    beq, bne, blt, bgeu,
    jal, jalr,
    csrwi,
};

enum class BurstMarker { on, off };

std::string_view mnemonic(Opcode op);
std::optional<Opcode> opcode_from_mnemonic(std::string_view text);

// ABI name for printing ("a0", "zero", ...).
std::string_view reg_name(Reg r);
// Accepts x0..x31 and ABI aliases (plus "fp").
std::optional<Reg> parse_reg(std::string_view text);

bool is_load(Opcode op);
bool is_store(Opcode op);
inline bool is_memory(Opcode op) { return is_load(op) || is_store(op); }
bool is_cond_branch(Opcode op);
// Any instruction that can redirect control flow (branches, jal, jalr).
bool is_control(Opcode op);
// Access width in bytes for memory opcodes, 0 otherwise.
unsigned access_width(Opcode op);

struct Instruction {
    Opcode op = Opcode::addi;
    Reg rd = 0;
    Reg rs1 = 0;
    Reg rs2 = 0;
    std::int64_t imm = 0;
    // Branch/jal target: label as written and the resolved instruction index.
    std::string label;
    std::size_t target = 0;
    BurstMarker marker = BurstMarker::on;
    int source_line = 0;

    // Registers read by the instruction (x0 included when named).
    std::vector<Reg> sources() const;
    // Register written, if any (never reported for x0).
    std::optional<Reg> dest() const;

    // Structural equality; source_line is ignored.
    bool same_as(const Instruction& other) const;
};

struct BurstRegion {
    std::size_t on = 0;   // index of csrwi MSPEC, BURST_ON
    std::size_t off = 0;  // index of matching BURST_OFF

    bool contains(std::size_t index) const { return index >= on && index <= off; }
    friend bool operator==(const BurstRegion&, const BurstRegion&) = default;
};

struct Diagnostic {
    int line = 0;
    int column = 0;
    std::string message;
};

struct Program {
    std::vector<Instruction> instructions;
    std::map<std::string, std::size_t> labels;
    std::vector<BurstRegion> burst_regions;
    std::map<std::string, std::int64_t> symbols;
    std::vector<Diagnostic> warnings;

    std::size_t size() const { return instructions.size(); }
    const Instruction& at(std::size_t i) const { return instructions.at(i); }
    // Region whose [on, off] interval covers the index.
    std::optional<BurstRegion> region_of(std::size_t index) const;

    // Structural equality over instructions, labels and regions.
    bool same_as(const Program& other) const;
};

class ParseError : public std::runtime_error {
public:
    enum class Kind { unknown_mnemonic, unresolved_label, malformed_operand, unmatched_burst_marker };

    ParseError(Kind kind, int line, int column, std::string message, std::string name = {},
               std::size_t index = 0);

    Kind kind() const { return kind_; }
    int line() const { return line_; }
    int column() const { return column_; }
    const std::string& name() const { return name_; }
    std::size_t index() const { return index_; }
    std::string_view kind_name() const;

private:
    Kind kind_;
    int line_;
    int column_;
    std::string name_;
    std::size_t index_;
};

Program parse_program(std::string_view text);

// Canonical text form. parse_program(pretty_print(p)) is structurally equal to p.
std::string pretty_print(const Program& program);
std::string format_instruction(const Instruction& inst);

// Stable identity of a program's structure, used to bind analysis reports.
std::uint64_t fingerprint(const Program& program);

}  // namespace rmi
