#pragma once

// Reader and writer for a restricted subset of the MATPOWER case format.
//
// Only `mpc.baseMVA = <value>;` and bracketed matrix blocks `mpc.<name> = [ ... ];`
// are interpreted. Every matrix row must be terminated by `;`. Anything after a
// `%` is a comment. Of the bus table we keep columns 1 (id), 2 (type) and
// 9 (Va, degrees); of the branch table columns 1, 2 (endpoints), 4 (x) and
// 11 (status). Other blocks and columns are syntax-checked and dropped.

#include <charconv>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fdia/builtin_cases.hpp"
#include "fdia/errors.hpp"

namespace fdia {

enum class BusType { reference, pv, pq };
enum class BranchStatus { in_service, out_of_service };

struct BusRecord {
  int id = 0;
  double voltage_angle = 0.0;  // degrees
  BusType bus_type = BusType::pq;

  friend bool operator==(const BusRecord&, const BusRecord&) = default;
};

struct BranchRecord {
  int from_bus = 0;
  int to_bus = 0;
  double reactance = 0.0;  // p.u.
  BranchStatus status = BranchStatus::in_service;

  friend bool operator==(const BranchRecord&, const BranchRecord&) = default;
};

struct CaseSystem {
  std::string name;
  double base_mva = 100.0;
  std::vector<BusRecord> buses;
  std::vector<BranchRecord> branches;

  friend bool operator==(const CaseSystem&, const CaseSystem&) = default;
};

enum class BuiltinCase { ieee9, ieee57, ieee118 };

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

inline std::string_view strip_comment(std::string_view line) {
  bool in_quote = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '\'') in_quote = !in_quote;
    if (line[i] == '%' && !in_quote) return line.substr(0, i);
  }
  return line;
}

inline double parse_number(std::string_view token, std::size_t line_no) {
  double value = 0.0;
  const char* begin = token.data();
  const char* end = token.data() + token.size();
  if (!token.empty() && *begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end) {
    throw ParseError(line_no, "malformed number '" + std::string(token) + "'");
  }
  return value;
}

inline std::vector<double> parse_row(std::string_view body, std::size_t line_no) {
  std::vector<double> row;
  std::size_t pos = 0;
  while (pos < body.size()) {
    while (pos < body.size() && (body[pos] == ' ' || body[pos] == '\t' || body[pos] == ',')) ++pos;
    if (pos >= body.size()) break;
    std::size_t end = pos;
    while (end < body.size() && body[end] != ' ' && body[end] != '\t' && body[end] != ',') ++end;
    row.push_back(parse_number(body.substr(pos, end - pos), line_no));
    pos = end;
  }
  return row;
}

struct MatrixBlock {
  std::size_t first_line = 0;
  std::vector<std::vector<double>> rows;
};

inline int as_int(double v, std::size_t row, const char* what) {
  const auto i = static_cast<int>(v);
  if (static_cast<double>(i) != v) {
    throw ValidationError(std::string(what) + " in row " + std::to_string(row + 1) +
                          " is not an integer");
  }
  return i;
}

inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Checks the CaseSystem invariants. Throws ValidationError.
inline void validate_case(const CaseSystem& cs) {
  if (!(cs.base_mva > 0.0)) throw ValidationError("baseMVA must be positive");
  std::set<int> ids;
  int references = 0;
  for (const auto& bus : cs.buses) {
    if (!ids.insert(bus.id).second) {
      throw ValidationError("duplicate bus id " + std::to_string(bus.id));
    }
    if (bus.bus_type == BusType::reference) ++references;
  }
  if (references != 1) {
    throw ValidationError("expected exactly one reference bus, found " + std::to_string(references));
  }
  for (std::size_t k = 0; k < cs.branches.size(); ++k) {
    const auto& br = cs.branches[k];
    const auto tag = "branch " + std::to_string(k + 1);
    if (!ids.contains(br.from_bus) || !ids.contains(br.to_bus)) {
      throw ValidationError(tag + " references an unknown bus");
    }
    if (br.from_bus == br.to_bus) throw ValidationError(tag + " is a self-loop");
    if (br.status == BranchStatus::in_service && br.reactance == 0.0) {
      throw ValidationError(tag + " is in service with zero reactance");
    }
  }
}

inline CaseSystem parse_case(std::string_view text) {
  CaseSystem cs;
  std::optional<double> base_mva;
  std::map<std::string, detail::MatrixBlock, std::less<>> blocks;

  std::string current_block;
  detail::MatrixBlock current;
  std::size_t ncols = 0;
  bool in_block = false;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = (nl == std::string_view::npos) ? text.size() + 1 : nl + 1;
    ++line_no;

    auto line = detail::trim(detail::strip_comment(raw));
    if (line.empty()) continue;

    if (in_block) {
      if (line.front() == ']') {
        if (detail::trim(line.substr(1)) != ";" && detail::trim(line.substr(1)) != "") {
          throw ParseError(line_no, "unexpected text after ']'");
        }
        blocks[current_block] = std::move(current);
        in_block = false;
        continue;
      }
      bool closes = false;
      if (line.ends_with("];")) {
        line = detail::trim(line.substr(0, line.size() - 2));
        closes = true;
      }
      if (line.empty() || line.back() != ';') {
        throw ParseError(line_no, "matrix row in block '" + current_block + "' is not terminated by ';'");
      }
      auto row = detail::parse_row(line.substr(0, line.size() - 1), line_no);
      if (row.empty()) throw ParseError(line_no, "empty matrix row");
      if (ncols == 0) ncols = row.size();
      if (row.size() != ncols) {
        throw ParseError(line_no, "row has " + std::to_string(row.size()) + " columns, expected " +
                                      std::to_string(ncols));
      }
      current.rows.push_back(std::move(row));
      if (closes) {
        blocks[current_block] = std::move(current);
        in_block = false;
      }
      continue;
    }

    if (line.starts_with("function")) {
      const auto eq = line.find('=');
      if (eq != std::string_view::npos) cs.name = std::string(detail::trim(line.substr(eq + 1)));
      continue;
    }
    if (!line.starts_with("mpc.")) continue;

    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(line_no, "expected '=' in assignment");
    const auto field = std::string(detail::trim(line.substr(4, eq - 4)));
    auto rhs = detail::trim(line.substr(eq + 1));

    if (rhs.starts_with("[")) {
      current_block = field;
      current = detail::MatrixBlock{line_no, {}};
      ncols = 0;
      in_block = true;
      rhs = detail::trim(rhs.substr(1));
      if (!rhs.empty()) throw ParseError(line_no, "matrix rows must start on the line after '['");
      continue;
    }
    if (field == "baseMVA") {
      if (rhs.empty() || rhs.back() != ';') throw ParseError(line_no, "baseMVA assignment not terminated by ';'");
      base_mva = detail::parse_number(detail::trim(rhs.substr(0, rhs.size() - 1)), line_no);
    }
  }
  if (in_block) throw ParseError(line_no, "unterminated matrix block '" + current_block + "'");

  if (!base_mva) throw StructureError("missing mpc.baseMVA");
  auto bus_it = blocks.find("bus");
  if (bus_it == blocks.end()) throw StructureError("missing mpc.bus block");
  auto branch_it = blocks.find("branch");
  if (branch_it == blocks.end()) throw StructureError("missing mpc.branch block");

  cs.base_mva = *base_mva;
  const auto& bus_rows = bus_it->second.rows;
  const auto& branch_rows = branch_it->second.rows;
  if (!bus_rows.empty() && bus_rows.front().size() < 9) throw StructureError("mpc.bus needs at least 9 columns");
  if (!branch_rows.empty() && branch_rows.front().size() < 11) {
    throw StructureError("mpc.branch needs at least 11 columns");
  }

  for (std::size_t r = 0; r < bus_rows.size(); ++r) {
    const auto& row = bus_rows[r];
    BusRecord bus;
    bus.id = detail::as_int(row[0], r, "bus id");
    switch (detail::as_int(row[1], r, "bus type")) {
      case 1: bus.bus_type = BusType::pq; break;
      case 2: bus.bus_type = BusType::pv; break;
      case 3: bus.bus_type = BusType::reference; break;
      default: throw ValidationError("unsupported bus type in bus row " + std::to_string(r + 1));
    }
    bus.voltage_angle = row[8];
    cs.buses.push_back(bus);
  }
  for (std::size_t r = 0; r < branch_rows.size(); ++r) {
    const auto& row = branch_rows[r];
    BranchRecord br;
    br.from_bus = detail::as_int(row[0], r, "branch from bus");
    br.to_bus = detail::as_int(row[1], r, "branch to bus");
    br.reactance = row[3];
    br.status = row[10] != 0.0 ? BranchStatus::in_service : BranchStatus::out_of_service;
    cs.branches.push_back(br);
  }
  validate_case(cs);
  return cs;
}

/// Writes the restricted format; parse_case(serialize_case(c)) == c.
inline std::string serialize_case(const CaseSystem& cs) {
  std::ostringstream out;
  out << "function mpc = " << (cs.name.empty() ? "case" : cs.name) << "\n";
  out << "mpc.baseMVA = " << detail::format_number(cs.base_mva) << ";\n\n";
  out << "%\tbus_i\ttype\tPd\tQd\tGs\tBs\tarea\tVm\tVa\n";
  out << "mpc.bus = [\n";
  for (const auto& bus : cs.buses) {
    const int type = bus.bus_type == BusType::reference ? 3 : bus.bus_type == BusType::pv ? 2 : 1;
    out << '\t' << bus.id << '\t' << type << "\t0\t0\t0\t0\t1\t1\t" << detail::format_number(bus.voltage_angle)
        << ";\n";
  }
  out << "];\n\n";
  out << "%\tfbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus\n";
  out << "mpc.branch = [\n";
  for (const auto& br : cs.branches) {
    out << '\t' << br.from_bus << '\t' << br.to_bus << "\t0\t" << detail::format_number(br.reactance)
        << "\t0\t0\t0\t0\t0\t0\t" << (br.status == BranchStatus::in_service ? 1 : 0) << ";\n";
  }
  out << "];\n";
  return out.str();
}

inline std::string_view builtin_text(BuiltinCase which) {
  switch (which) {
    case BuiltinCase::ieee9: return builtin::kCase9;
    case BuiltinCase::ieee57: return builtin::kCase57;
    case BuiltinCase::ieee118: return builtin::kCase118;
  }
  return {};
}

inline CaseSystem load_builtin(BuiltinCase which) { return parse_case(builtin_text(which)); }

inline std::string_view builtin_name(BuiltinCase which) {
  switch (which) {
    case BuiltinCase::ieee9: return "ieee9";
    case BuiltinCase::ieee57: return "ieee57";
    case BuiltinCase::ieee118: return "ieee118";
  }
  return {};
}

inline std::optional<BuiltinCase> builtin_from_name(std::string_view name) {
  for (auto c : {BuiltinCase::ieee9, BuiltinCase::ieee57, BuiltinCase::ieee118}) {
    if (builtin_name(c) == name) return c;
  }
  return std::nullopt;
}

}  // namespace fdia
