#include "pfkde/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "pfkde/csv.hpp"

namespace pfkde {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(text);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  if (!text.empty() && text.back() == sep) out.emplace_back();
  return out;
}

double parse_real(const std::string& s) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (s.empty() || ec != std::errc() || ptr != end || !std::isfinite(v)) {
    throw ConfigError("not a finite real number: '" + s + "'");
  }
  return v;
}

std::uint64_t parse_u64(const std::string& s) {
  std::uint64_t v = 0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (s.empty() || ec != std::errc() || ptr != end) {
    throw ConfigError("not a non-negative integer: '" + s + "'");
  }
  return v;
}

Matrix square_from(const std::vector<double>& v, const std::string& key) {
  const auto n = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(v.size()))));
  if (n == 0 || n * n != v.size()) {
    throw ConfigError(key + " must have a square number of entries, got " + std::to_string(v.size()));
  }
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m(i, j) = v[i * n + j];
  return m;
}

std::string join(const Matrix& m) {
  std::string s;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (!s.empty()) s += ' ';
      s += format_real(m(i, j));
    }
  return s;
}

}  // namespace

std::vector<double> parse_real_list(const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split(text, ',')) out.push_back(parse_real(item));
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

std::vector<unsigned> parse_unsigned_list(const std::string& text) {
  std::vector<unsigned> out;
  for (const auto& item : split(text, ',')) {
    const auto v = parse_u64(item);
    if (v > 0xffffffffu) throw ConfigError("value out of range: " + item);
    out.push_back(static_cast<unsigned>(v));
  }
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

ModelConfig ModelConfig::benchmark() {
  ModelConfig c;
  const auto m = LinearGaussianModel::benchmark();
  c.a = m.a();
  c.b = m.b();
  return c;
}

LinearGaussianModel ModelConfig::model() const {
  const auto dx = a.rows();
  const auto dy = b.rows();
  const Matrix qq = q.size() ? q : Matrix::Identity(dx, dx);
  const Matrix rr = r.size() ? r : Matrix::Identity(dy, dy);
  return LinearGaussianModel(a, b, qq, rr);
}

std::vector<std::pair<std::string, std::string>> ModelConfig::echo() const {
  std::vector<std::pair<std::string, std::string>> out;
  out.emplace_back("A", join(a));
  out.emplace_back("B", join(b));
  if (q.size()) out.emplace_back("Q", join(q));
  if (r.size()) out.emplace_back("R", join(r));
  out.emplace_back("T", std::to_string(horizon));
  out.emplace_back("data_seed", std::to_string(seed));
  return out;
}

ModelConfig parse_model_config(const std::string& text, const std::string& origin) {
  ModelConfig c;
  c.source = origin;
  std::vector<double> a, b, q, r;
  bool have_a = false, have_b = false;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> seen;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key=value");
    }
    const auto key = trim(std::string_view(t).substr(0, eq));
    const auto value = trim(std::string_view(t).substr(eq + 1));
    for (const auto& s : seen)
      if (s == key) throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    seen.push_back(key);
    try {
      if (key == "A") {
        a = parse_real_list(value);
        have_a = true;
      } else if (key == "B") {
        b = parse_real_list(value);
        have_b = true;
      } else if (key == "Q") {
        q = parse_real_list(value);
      } else if (key == "R") {
        r = parse_real_list(value);
      } else if (key == "T") {
        c.horizon = parse_u64(value);
        if (c.horizon < 1) throw ConfigError("T must be at least 1");
      } else if (key == "seed") {
        c.seed = parse_u64(value);
      } else if (key == "schema_version") {
        const auto v = parse_u64(value);
        if (v != static_cast<std::uint64_t>(ModelConfig::kSchemaVersion)) {
          throw ConfigError("unsupported schema_version " + value);
        }
        c.schema_version = static_cast<int>(v);
      } else {
        throw ConfigError("unknown key '" + key + "'");
      }
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  const auto bench = ModelConfig::benchmark();
  c.a = have_a ? square_from(a, "A") : bench.a;
  const auto dx = static_cast<std::size_t>(c.a.rows());
  if (have_b) {
    if (b.size() % dx != 0) {
      throw ConfigError(origin + ": B has " + std::to_string(b.size()) +
                        " entries, not a multiple of the state dimension " + std::to_string(dx));
    }
    const std::size_t dy = b.size() / dx;
    c.b.resize(dy, dx);
    for (std::size_t i = 0; i < dy; ++i)
      for (std::size_t j = 0; j < dx; ++j) c.b(i, j) = b[i * dx + j];
  } else if (dx == 2) {
    c.b = bench.b;
  } else {
    throw ConfigError(origin + ": B is required when A is not 2x2");
  }
  try {
    if (!q.empty()) {
      c.q = square_from(q, "Q");
      if (c.q.rows() != c.a.rows()) throw ConfigError("Q must match the state dimension");
    }
    if (!r.empty()) {
      c.r = square_from(r, "R");
      if (c.r.rows() != c.b.rows()) throw ConfigError("R must match the observation dimension");
    }
    (void)c.model();  // validates covariances
  } catch (const std::invalid_argument& e) {
    throw ConfigError(origin + ": " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  return c;
}

ModelConfig load_model_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_model_config(buf.str(), path.string());
}

}  // namespace pfkde
