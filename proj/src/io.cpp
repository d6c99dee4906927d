#include "dnr/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "dnr/error.hpp"

namespace dnr {

namespace {

constexpr std::string_view kModelMagic = "DNR1\n";
constexpr std::string_view kGridMagic = "DNG1\n";

void put_f64(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xffu));
}

double get_f64(std::string_view bytes, std::size_t offset) {
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b) {
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[offset + b])) << (8 * b);
  }
  return std::bit_cast<double>(bits);
}

using Header = std::map<std::string, std::string, std::less<>>;

// Splits "k=v k=v" into a map; `offset` is only used in messages.
Header parse_header(std::string_view line, std::size_t offset) {
  Header h;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && line[pos] == ' ') ++pos;
    if (pos >= line.size()) break;
    std::size_t end = line.find(' ', pos);
    if (end == std::string_view::npos) end = line.size();
    const std::string_view tok = line.substr(pos, end - pos);
    const std::size_t eq = tok.find('=');
    if (eq == std::string_view::npos || eq == 0) {
      throw Error(ErrorCode::format, "malformed header field '" + std::string(tok) + "' at byte offset " +
                                         std::to_string(offset + pos));
    }
    h.emplace(std::string(tok.substr(0, eq)), std::string(tok.substr(eq + 1)));
    pos = end;
  }
  return h;
}

const std::string& field(const Header& h, std::string_view key) {
  auto it = h.find(key);
  if (it == h.end()) throw Error(ErrorCode::format, "header lacks '" + std::string(key) + "'");
  return it->second;
}

// Magic check plus header line; returns the payload offset.
std::size_t read_preamble(std::string_view bytes, std::string_view magic, const char* what, int version,
                          Header& header) {
  if (bytes.size() < magic.size() || bytes.substr(0, magic.size()) != magic) {
    throw Error(ErrorCode::format, std::string("not a ") + what + " file: bad magic at byte offset 0");
  }
  const std::size_t eol = bytes.find('\n', magic.size());
  if (eol == std::string_view::npos) {
    throw Error(ErrorCode::format, std::string(what) + " file truncated in header at byte offset " +
                                       std::to_string(bytes.size()));
  }
  header = parse_header(bytes.substr(magic.size(), eol - magic.size()), magic.size());
  const auto v = parse_u64(field(header, "version"));
  if (v != static_cast<std::uint64_t>(version)) {
    throw Error(ErrorCode::format, std::string("unsupported ") + what + " format version " + std::to_string(v) +
                                       " (expected " + std::to_string(version) + ")");
  }
  return eol + 1;
}

void require_payload(std::string_view bytes, std::size_t offset, std::size_t doubles, const char* what) {
  const std::size_t need = offset + 8 * doubles;
  if (bytes.size() < need) {
    throw Error(ErrorCode::format, std::string(what) + " file truncated at byte offset " +
                                       std::to_string(bytes.size()) + ": payload needs " + std::to_string(need) +
                                       " bytes");
  }
  if (bytes.size() > need) {
    throw Error(ErrorCode::format, std::string(what) + " file has " + std::to_string(bytes.size() - need) +
                                       " trailing bytes after byte offset " + std::to_string(need));
  }
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t end = s.find(sep, pos);
    out.push_back(s.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos));
    if (end == std::string_view::npos) break;
    pos = end + 1;
  }
  return out;
}

std::string join_doubles(const std::vector<double>& v, char sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out.push_back(sep);
    out += format_double(v[i]);
  }
  return out;
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view token) {
  if (token == "nan") return std::nan("");
  if (token == "inf") return INFINITY;
  if (token == "-inf") return -INFINITY;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size() || token.empty()) {
    throw Error(ErrorCode::format, "not a number: '" + std::string(token) + "'");
  }
  return v;
}

std::uint64_t parse_u64(std::string_view token) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size() || token.empty()) {
    throw Error(ErrorCode::format, "not a non-negative integer: '" + std::string(token) + "'");
  }
  return v;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::io, "short write to " + path.string());
}

std::string encode_model(const Network& net) {
  net.spec.validate();
  const auto flat = net.params.flatten();
  std::string out(kModelMagic);
  out += "version=" + std::to_string(kModelFormatVersion) + " input_dim=" + std::to_string(net.spec.input_dim) +
         " output_dim=" + std::to_string(net.spec.output_dim) + " width=" + std::to_string(net.spec.width) +
         " depth=" + std::to_string(net.spec.depth) + " activation=" + std::string(to_string(net.spec.activation)) +
         " params=" + std::to_string(flat.size()) + "\n";
  for (double v : flat) put_f64(out, v);
  return out;
}

Network decode_model(std::string_view bytes) {
  Header h;
  const std::size_t offset = read_preamble(bytes, kModelMagic, "model", kModelFormatVersion, h);
  NetworkSpec spec;
  spec.input_dim = parse_u64(field(h, "input_dim"));
  spec.output_dim = parse_u64(field(h, "output_dim"));
  spec.width = parse_u64(field(h, "width"));
  spec.depth = parse_u64(field(h, "depth"));
  spec.activation = parse_activation(field(h, "activation"));
  spec.validate();
  const auto declared = parse_u64(field(h, "params"));
  if (declared != param_count(spec)) {
    throw Error(ErrorCode::format, "header declares " + std::to_string(declared) + " parameters, spec needs " +
                                       std::to_string(param_count(spec)));
  }
  require_payload(bytes, offset, declared, "model");
  std::vector<double> flat(declared);
  for (std::size_t i = 0; i < declared; ++i) {
    flat[i] = get_f64(bytes, offset + 8 * i);
    if (!std::isfinite(flat[i])) {
      throw Error(ErrorCode::non_finite, "non-finite parameter " + std::to_string(i) + " at byte offset " +
                                             std::to_string(offset + 8 * i));
    }
  }
  Network net{spec, Parameters::zeros(spec)};
  net.params.assign(flat);
  return net;
}

void save_model(const Network& net, const std::filesystem::path& path) { write_file(path, encode_model(net)); }

Network load_model(const std::filesystem::path& path) { return decode_model(read_file(path)); }

std::string encode_grid(const GridField& f) {
  f.validate();
  std::string out(kGridMagic);
  out += "version=" + std::to_string(kGridFormatVersion) + " nx=" + std::to_string(f.nx) +
         " ny=" + std::to_string(f.ny) + " components=" + std::to_string(f.components) +
         " snapshots=" + std::to_string(f.times.size()) + " x0=" + format_double(f.x0) +
         " x1=" + format_double(f.x1) + " y0=" + format_double(f.y0) + " y1=" + format_double(f.y1) +
         " dt=" + format_double(f.dt) + "\n";
  for (double t : f.times) put_f64(out, t);
  for (double v : f.values) put_f64(out, v);
  return out;
}

GridField decode_grid(std::string_view bytes) {
  Header h;
  const std::size_t offset = read_preamble(bytes, kGridMagic, "grid", kGridFormatVersion, h);
  GridField f;
  f.nx = parse_u64(field(h, "nx"));
  f.ny = parse_u64(field(h, "ny"));
  f.components = parse_u64(field(h, "components"));
  const std::size_t snaps = parse_u64(field(h, "snapshots"));
  f.x0 = parse_double(field(h, "x0"));
  f.x1 = parse_double(field(h, "x1"));
  f.y0 = parse_double(field(h, "y0"));
  f.y1 = parse_double(field(h, "y1"));
  f.dt = parse_double(field(h, "dt"));
  if (f.nx == 0 || f.ny == 0 || f.components == 0 || snaps == 0 || f.nx > (1u << 20) || f.ny > (1u << 20) ||
      snaps > (1u << 24) || f.components > 2) {
    throw Error(ErrorCode::format, "grid header has out-of-range sizes");
  }
  const std::size_t n_values = snaps * f.components * f.nx * f.ny;
  require_payload(bytes, offset, snaps + n_values, "grid");
  f.times.resize(snaps);
  for (std::size_t k = 0; k < snaps; ++k) f.times[k] = get_f64(bytes, offset + 8 * k);
  f.values.resize(n_values);
  const std::size_t base = offset + 8 * snaps;
  for (std::size_t i = 0; i < n_values; ++i) {
    f.values[i] = get_f64(bytes, base + 8 * i);
    if (!std::isfinite(f.values[i])) {
      throw Error(ErrorCode::non_finite, "non-finite grid value at byte offset " + std::to_string(base + 8 * i));
    }
  }
  f.validate();
  return f;
}

void save_grid(const GridField& field, const std::filesystem::path& path) { write_file(path, encode_grid(field)); }

GridField load_grid(const std::filesystem::path& path) { return decode_grid(read_file(path)); }

std::string encode_dataset(const Dataset& d) {
  d.validate();
  std::string out = "# dnr dataset v1\n";
  out += "# provenance=" + d.provenance + "\n";
  out += "# margin=" + format_double(d.scaling.margin) + "\n";
  out += "# scale=" + join_doubles(d.scaling.scale, ';') + "\n";
  out += "# offset=" + join_doubles(d.scaling.offset, ';') + "\n";
  for (std::size_t c = 0; c < d.inputs.cols(); ++c) out += (c ? ",x" : "x") + std::to_string(c);
  for (std::size_t c = 0; c < d.labels.cols(); ++c) out += ",y" + std::to_string(c);
  out += "\n";
  for (std::size_t r = 0; r < d.inputs.rows(); ++r) {
    for (std::size_t c = 0; c < d.inputs.cols(); ++c) {
      if (c) out += ",";
      out += format_double(d.inputs(r, c));
    }
    for (std::size_t c = 0; c < d.labels.cols(); ++c) out += "," + format_double(d.labels(r, c));
    out += "\n";
  }
  return out;
}

Dataset decode_dataset(std::string_view text) {
  Dataset d;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  std::size_t n_in = 0;
  std::size_t n_out = 0;
  bool have_header = false;
  std::vector<std::vector<double>> rows;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    auto fail = [&](const std::string& why) {
      return Error(ErrorCode::format, "dataset line " + std::to_string(line_no) + ": " + why);
    };
    if (line.front() == '#') {
      const std::string_view body = line.substr(1);
      const std::size_t eq = body.find('=');
      if (eq == std::string_view::npos) continue;
      std::string_view key = body.substr(0, eq);
      while (!key.empty() && key.front() == ' ') key.remove_prefix(1);
      const std::string_view value = body.substr(eq + 1);
      try {
        if (key == "provenance") d.provenance = std::string(value);
        if (key == "margin") d.scaling.margin = parse_double(value);
        if (key == "scale" || key == "offset") {
          auto& dst = key == "scale" ? d.scaling.scale : d.scaling.offset;
          dst.clear();
          for (auto tok : split(value, ';')) dst.push_back(parse_double(tok));
        }
      } catch (const Error& e) {
        throw fail(e.what());
      }
      continue;
    }
    const auto cells = split(line, ',');
    if (!have_header) {
      for (auto c : cells) {
        if (!c.empty() && c.front() == 'x') ++n_in;
        else if (!c.empty() && c.front() == 'y') ++n_out;
        else throw fail("header cell '" + std::string(c) + "' is neither x<i> nor y<j>");
      }
      if (n_in == 0 || n_out == 0) throw fail("header needs x and y columns");
      have_header = true;
      continue;
    }
    if (cells.size() != n_in + n_out) {
      throw fail("expected " + std::to_string(n_in + n_out) + " values, got " + std::to_string(cells.size()));
    }
    std::vector<double> row;
    for (auto c : cells) {
      try {
        row.push_back(parse_double(c));
      } catch (const Error& e) {
        throw fail(e.what());
      }
    }
    rows.push_back(std::move(row));
  }
  if (!have_header) throw Error(ErrorCode::format, "dataset has no header row");
  d.inputs = Matrix(rows.size(), n_in);
  d.labels = Matrix(rows.size(), n_out);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < n_in; ++c) d.inputs(r, c) = rows[r][c];
    for (std::size_t c = 0; c < n_out; ++c) d.labels(r, c) = rows[r][n_in + c];
  }
  if (d.scaling.scale.empty() && d.scaling.offset.empty()) {
    const double margin = d.scaling.margin;
    d.scaling = ScalingRecord::identity(n_out);
    d.scaling.margin = margin;
  }
  for (double s : d.scaling.scale)
    if (!(s > 0.0)) throw Error(ErrorCode::format, "dataset scale must be > 0");
  d.validate();
  return d;
}

void save_dataset(const Dataset& d, const std::filesystem::path& path) { write_file(path, encode_dataset(d)); }

Dataset load_dataset(const std::filesystem::path& path) { return decode_dataset(read_file(path)); }

std::string metrics_row(const EpochRecord& r) {
  const LossValue& l = r.loss;
  return std::to_string(r.epoch) + "," + format_double(l.total) + "," + format_double(l.main) + "," +
         format_double(l.similarity) + "," + format_double(l.residual) + "," + format_double(l.ic) + "," +
         format_double(l.bc) + "," + format_double(r.mse) + "\n";
}

std::string encode_metrics(const std::vector<EpochRecord>& history) {
  std::string out(kMetricsHeader);
  out += "\n";
  for (const auto& r : history) out += metrics_row(r);
  return out;
}

std::string encode_scan(const SurfaceScan& scan, const NetworkSpec& spec) {
  std::string out = "# x=" + to_string(scan.x.coord, spec) + " y=" + to_string(scan.y.coord, spec) + "\n";
  out += "x,y,loss\n";
  for (std::size_t i = 0; i < scan.x.points; ++i) {
    for (std::size_t j = 0; j < scan.y.points; ++j) {
      out += format_double(scan.x.value(i)) + "," + format_double(scan.y.value(j)) + "," +
             format_double(scan.values(i, j)) + "\n";
    }
  }
  return out;
}

std::string encode_collapse(const CollapseReport& report) {
  nlohmann::json j;
  j["effective_rank"] = report.effective_rank;
  j["width"] = report.distances.rows();
  j["singular_values"] = report.singular_values;
  j["duplicate_groups"] = report.duplicate_groups;
  nlohmann::json dist = nlohmann::json::array();
  for (std::size_t r = 0; r < report.distances.rows(); ++r) {
    auto row = report.distances.row(r);
    dist.push_back(std::vector<double>(row.begin(), row.end()));
  }
  j["distances"] = std::move(dist);
  return j.dump(2) + "\n";
}

}  // namespace dnr
