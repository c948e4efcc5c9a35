#include "f2/topology.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "f2/errors.hpp"

namespace f2 {

namespace {

std::string mask_to_string(const std::vector<bool>& mask) {
  std::string s;
  s.reserve(mask.size());
  for (bool b : mask) s.push_back(b ? '1' : '0');
  return s;
}

bool any_bit(const std::vector<bool>& mask) {
  for (bool b : mask)
    if (b) return true;
  return false;
}

}  // namespace

ValidationReport validate_spec(const TopologySpec& spec) {
  ValidationReport rep;
  if (spec.n_blocks < 0) rep.errors.push_back("block count must be non-negative");
  if (spec.hidden <= 0) rep.errors.push_back("hidden dim must be positive");
  if (static_cast<int>(spec.blocks.size()) != spec.n_blocks)
    rep.errors.push_back("expected " + std::to_string(spec.n_blocks) + " blocks, got " +
                         std::to_string(spec.blocks.size()));
  for (std::size_t i = 0; i < spec.blocks.size(); ++i) {
    const std::size_t want = i + 1;
    if (spec.blocks[i].select.size() != want)
      rep.errors.push_back("block " + std::to_string(i + 1) + ": selection mask has " +
                           std::to_string(spec.blocks[i].select.size()) + " bits, expected " +
                           std::to_string(want));
  }
  if (spec.output.select.size() != static_cast<std::size_t>(spec.n_blocks) + 1)
    rep.errors.push_back("output: selection mask has " +
                         std::to_string(spec.output.select.size()) + " bits, expected " +
                         std::to_string(spec.n_blocks + 1));
  else if (!any_bit(spec.output.select))
    rep.errors.push_back("output: selection mask selects nothing");

  if (rep.ok()) {
    std::vector<bool> live = live_blocks(spec);
    for (int i = 1; i <= spec.n_blocks; ++i) {
      if (!any_bit(spec.blocks[(std::size_t)i - 1].select))
        rep.warnings.push_back("block " + std::to_string(i) +
                               " selects nothing and always outputs zeros");
      else if (!live[(std::size_t)i])
        rep.warnings.push_back("block " + std::to_string(i) +
                               " never reaches the output and is dead");
    }
  }
  return rep;
}

void ensure_valid(const TopologySpec& spec) {
  ValidationReport rep = validate_spec(spec);
  if (rep.ok()) return;
  std::string msg = "invalid topology:";
  for (const std::string& e : rep.errors) msg += "\n  " + e;
  throw UsageError(msg);
}

std::vector<bool> live_blocks(const TopologySpec& spec) {
  std::vector<bool> live(static_cast<std::size_t>(spec.n_blocks) + 1, false);
  for (std::size_t j = 0; j < spec.output.select.size(); ++j)
    if (spec.output.select[j]) live[j] = true;
  // walk blocks from last to first so liveness propagates through chains
  for (int i = spec.n_blocks; i >= 1; --i) {
    if (!live[(std::size_t)i]) continue;
    const auto& sel = spec.blocks[(std::size_t)i - 1].select;
    for (std::size_t j = 0; j < sel.size(); ++j)
      if (sel[j]) live[j] = true;
  }
  // an empty-mask block emits zeros; it is not a live signal path
  for (int i = 1; i <= spec.n_blocks; ++i)
    if (!any_bit(spec.blocks[(std::size_t)i - 1].select)) live[(std::size_t)i] = false;
  return live;
}

std::string serialize_spec(const TopologySpec& spec) {
  std::ostringstream out;
  out << "blocks=" << spec.n_blocks << " hidden=" << spec.hidden
      << " act=" << to_string(spec.act) << "\n";
  for (std::size_t i = 0; i < spec.blocks.size(); ++i) {
    const BlockSpec& b = spec.blocks[i];
    out << "block " << (i + 1) << ": select=" << mask_to_string(b.select)
        << " fuse=" << to_string(b.fuse) << " agg=" << to_string(b.agg) << "\n";
  }
  out << "output: select=" << mask_to_string(spec.output.select)
      << " fuse=" << to_string(spec.output.fuse) << "\n";
  return out.str();
}

namespace {

[[noreturn]] void spec_fail(int lineno, const std::string& what) {
  throw ParseError("spec line " + std::to_string(lineno) + ": " + what);
}

// `key=value` token, returns value or fails
std::string expect_kv(const std::string& tok, const std::string& key, int lineno) {
  const std::string prefix = key + "=";
  if (tok.rfind(prefix, 0) != 0)
    spec_fail(lineno, "expected '" + key + "=...', got '" + tok + "'");
  return tok.substr(prefix.size());
}

int parse_int(const std::string& s, int lineno, const std::string& what) {
  int out = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc{} || p != s.data() + s.size())
    spec_fail(lineno, what + ": expected integer, got '" + s + "'");
  return out;
}

std::vector<bool> parse_mask(const std::string& s, std::size_t want, int lineno,
                             const std::string& where) {
  if (s.size() != want)
    spec_fail(lineno, where + ": selection mask '" + s + "' has " +
                          std::to_string(s.size()) + " bits, expected " + std::to_string(want));
  std::vector<bool> mask(want, false);
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '1') mask[i] = true;
    else if (s[i] != '0')
      spec_fail(lineno, where + ": selection mask must be 0/1, got '" + s + "'");
  }
  return mask;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> toks;
  std::string t;
  while (in >> t) toks.push_back(t);
  return toks;
}

}  // namespace

TopologySpec parse_spec(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  TopologySpec spec;
  bool have_header = false, have_output = false;
  int next_block = 1;

  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> toks = split_ws(line);

    if (!have_header) {
      if (toks.size() != 3) spec_fail(lineno, "header needs 'blocks=N hidden=d act=...'");
      spec.n_blocks = parse_int(expect_kv(toks[0], "blocks", lineno), lineno, "blocks");
      if (spec.n_blocks < 0) spec_fail(lineno, "blocks must be non-negative");
      spec.hidden = parse_int(expect_kv(toks[1], "hidden", lineno), lineno, "hidden");
      if (spec.hidden <= 0) spec_fail(lineno, "hidden must be positive");
      try {
        spec.act = act_from_string(expect_kv(toks[2], "act", lineno));
      } catch (const UsageError& e) {
        spec_fail(lineno, e.what());
      }
      have_header = true;
      continue;
    }

    if (toks[0] == "block") {
      if (have_output) spec_fail(lineno, "block line after the output line");
      if (toks.size() != 5) spec_fail(lineno, "block line needs 'block i: select=... fuse=... agg=...'");
      std::string idx_tok = toks[1];
      if (idx_tok.empty() || idx_tok.back() != ':') spec_fail(lineno, "expected 'block i:'");
      idx_tok.pop_back();
      const int idx = parse_int(idx_tok, lineno, "block index");
      if (idx != next_block)
        spec_fail(lineno, "block " + std::to_string(idx) + " out of order, expected block " +
                              std::to_string(next_block));
      if (idx > spec.n_blocks)
        spec_fail(lineno, "block " + std::to_string(idx) + " exceeds declared count " +
                              std::to_string(spec.n_blocks));
      BlockSpec b;
      b.select = parse_mask(expect_kv(toks[2], "select", lineno), (std::size_t)idx, lineno,
                            "block " + std::to_string(idx));
      try {
        b.fuse = fuse_from_string(expect_kv(toks[3], "fuse", lineno));
        b.agg = agg_from_string(expect_kv(toks[4], "agg", lineno));
      } catch (const UsageError& e) {
        spec_fail(lineno, e.what());
      }
      spec.blocks.push_back(std::move(b));
      ++next_block;
      continue;
    }

    if (toks[0] == "output:") {
      if (toks.size() != 3) spec_fail(lineno, "output line needs 'output: select=... fuse=...'");
      if (next_block != spec.n_blocks + 1)
        spec_fail(lineno, "output line before all " + std::to_string(spec.n_blocks) +
                              " blocks were given");
      spec.output.select = parse_mask(expect_kv(toks[1], "select", lineno),
                                      (std::size_t)spec.n_blocks + 1, lineno, "output");
      try {
        spec.output.fuse = fuse_from_string(expect_kv(toks[2], "fuse", lineno));
      } catch (const UsageError& e) {
        spec_fail(lineno, e.what());
      }
      have_output = true;
      continue;
    }

    spec_fail(lineno, "unrecognized line '" + line + "'");
  }

  if (!have_header) throw ParseError("spec: missing header line");
  if (!have_output) throw ParseError("spec: missing output line");
  ensure_valid(spec);
  return spec;
}

TopologySpec load_spec_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_spec(buf.str());
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void save_spec_file(const TopologySpec& spec, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path);
  out << serialize_spec(spec);
}

}  // namespace f2
