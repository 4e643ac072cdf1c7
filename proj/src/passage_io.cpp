#include "railpad/passage_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "railpad/error.hpp"
#include "railpad/text.hpp"

namespace railpad {

namespace {

constexpr std::string_view kCsvMagic = "# railpad-passage 1";
constexpr std::string_view kBinMagic = "RAILPAD-PASSAGE-BIN 1";

static_assert(std::endian::native == std::endian::little, "binary passage format assumes little-endian host");

std::string header_text(const PassageMeta& m) {
  std::ostringstream os;
  os << "# location_id=" << m.location_id << '\n';
  os << "# timestamp=" << format_iso8601(m.timestamp) << '\n';
  os << "# train_type=" << m.train_type << '\n';
  os << "# speed_kmh=" << text::format_double(m.speed_kmh) << '\n';
  os << "# fs_hz=" << text::format_double(m.fs_hz) << '\n';
  os << "# axle_loads_t=";
  for (std::size_t i = 0; i < m.axle_loads_t.size(); ++i) {
    if (i) os << ',';
    os << text::format_double(m.axle_loads_t[i]);
  }
  os << '\n';
  if (m.true_f2_hz) os << "# true_f2_hz=" << text::format_double(*m.true_f2_hz) << '\n';
  return os.str();
}

// Consumes `# key=value` lines until the first line that is not a header line,
// which is returned through `first_body_line`.
PassageMeta parse_header(std::istream& in, const std::string& source, std::string& first_body_line) {
  PassageMeta m;
  bool have_loc = false, have_ts = false, have_type = false, have_speed = false, have_fs = false;
  std::string line;
  first_body_line.clear();
  while (std::getline(in, line)) {
    auto view = text::trim(line);
    if (view.empty()) break;  // binary container: blank line ends the header
    if (view.size() < 2 || view.substr(0, 2) != "# ") {
      first_body_line = std::string(view);
      break;
    }
    view.remove_prefix(2);
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) throw DataError(source + ": malformed header line '" + std::string(view) + "'");
    const auto key = view.substr(0, eq);
    const auto value = view.substr(eq + 1);
    if (key == "location_id") {
      m.location_id = std::string(value);
      have_loc = true;
    } else if (key == "timestamp") {
      m.timestamp = parse_iso8601(value);
      have_ts = true;
    } else if (key == "train_type") {
      m.train_type = std::string(value);
      have_type = true;
    } else if (key == "speed_kmh") {
      m.speed_kmh = text::parse_double(value);
      have_speed = true;
    } else if (key == "fs_hz") {
      m.fs_hz = text::parse_double(value);
      have_fs = true;
    } else if (key == "axle_loads_t") {
      m.axle_loads_t.clear();
      if (!value.empty()) {
        for (auto f : text::split(value, ',')) m.axle_loads_t.push_back(text::parse_double(f));
      }
    } else if (key == "true_f2_hz") {
      m.true_f2_hz = text::parse_double(value);
    }  // unknown keys are ignored for forward compatibility
  }
  if (!(have_loc && have_ts && have_type && have_speed && have_fs)) {
    throw DataError(source + ": incomplete passage header");
  }
  if (!(m.fs_hz > 0.0)) throw DataError(source + ": fs_hz must be positive");
  return m;
}

template <typename T>
void write_pod(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in, const std::string& source) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw DataError(source + ": truncated binary passage");
  return value;
}

PassageRecord read_csv_body(std::istream& in, PassageMeta meta, const std::string& body_header,
                            const std::string& source) {
  if (body_header != "index,accel_g,wheel_pulse") throw DataError(source + ": missing sample column header");
  PassageRecord rec;
  rec.meta = std::move(meta);
  std::string line;
  std::size_t expected = 0;
  while (std::getline(in, line)) {
    auto view = text::trim(line);
    if (view.empty()) continue;
    auto fields = text::split(view, ',');
    if (fields.size() != 3) throw DataError(source + ": sample row " + std::to_string(expected) + " malformed");
    if (text::parse_int(fields[0]) != static_cast<long long>(expected)) {
      throw DataError(source + ": sample index out of sequence at row " + std::to_string(expected));
    }
    rec.accel_g.push_back(text::parse_double(fields[1]));
    const auto pulse = text::parse_int(fields[2]);
    if (pulse != 0 && pulse != 1) throw DataError(source + ": wheel_pulse must be 0 or 1");
    if (pulse == 1) rec.wheel_pulse_samples.push_back(expected);
    ++expected;
  }
  rec.validate();
  return rec;
}

PassageRecord read_binary_body(std::istream& in, PassageMeta meta, const std::string& source) {
  PassageRecord rec;
  rec.meta = std::move(meta);
  const auto n = read_pod<std::uint64_t>(in, source);
  if (n > (std::uint64_t{1} << 32)) throw DataError(source + ": implausible sample count");
  rec.accel_g.resize(n);
  in.read(reinterpret_cast<char*>(rec.accel_g.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw DataError(source + ": truncated binary passage");
  const auto m = read_pod<std::uint64_t>(in, source);
  if (m > n) throw DataError(source + ": more wheel pulses than samples");
  for (std::uint64_t i = 0; i < m; ++i) rec.wheel_pulse_samples.push_back(read_pod<std::uint64_t>(in, source));
  rec.validate();
  return rec;
}

}  // namespace

void write_passage_csv(const std::filesystem::path& path, const PassageRecord& record) {
  record.validate();
  std::ofstream out(path);
  if (!out) throw DataError("cannot write passage file " + path.string());
  out << kCsvMagic << '\n' << header_text(record.meta) << "index,accel_g,wheel_pulse\n";
  std::size_t next_pulse = 0;
  std::string row;
  for (std::size_t i = 0; i < record.accel_g.size(); ++i) {
    const bool pulse = next_pulse < record.wheel_pulse_samples.size() && record.wheel_pulse_samples[next_pulse] == i;
    if (pulse) ++next_pulse;
    row = std::to_string(i);
    row += ',';
    row += text::format_double(record.accel_g[i]);
    row += pulse ? ",1\n" : ",0\n";
    out << row;
  }
  if (!out) throw DataError("write failed for " + path.string());
}

void write_passage_binary(const std::filesystem::path& path, const PassageRecord& record) {
  record.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write passage file " + path.string());
  out << kBinMagic << '\n' << header_text(record.meta) << '\n';
  write_pod<std::uint64_t>(out, record.accel_g.size());
  out.write(reinterpret_cast<const char*>(record.accel_g.data()),
            static_cast<std::streamsize>(record.accel_g.size() * sizeof(double)));
  write_pod<std::uint64_t>(out, record.wheel_pulse_samples.size());
  for (auto idx : record.wheel_pulse_samples) write_pod<std::uint64_t>(out, idx);
  if (!out) throw DataError("write failed for " + path.string());
}

void write_passage(const std::filesystem::path& path, const PassageRecord& record, PassageFormat format) {
  if (format == PassageFormat::Csv) {
    write_passage_csv(path, record);
  } else {
    write_passage_binary(path, record);
  }
}

PassageRecord read_passage(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open passage file " + path.string());
  std::string magic;
  std::getline(in, magic);
  const auto source = path.string();
  std::string body;
  if (text::trim(magic) == kCsvMagic) {
    auto meta = parse_header(in, source, body);
    return read_csv_body(in, std::move(meta), body, source);
  }
  if (text::trim(magic) == kBinMagic) {
    auto meta = parse_header(in, source, body);
    if (!body.empty()) throw DataError(source + ": binary header not terminated by a blank line");
    return read_binary_body(in, std::move(meta), source);
  }
  throw DataError(source + ": not a passage file");
}

PassageMeta read_passage_meta(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open passage file " + path.string());
  std::string magic;
  std::getline(in, magic);
  if (text::trim(magic) != kCsvMagic && text::trim(magic) != kBinMagic) {
    throw DataError(path.string() + ": not a passage file");
  }
  std::string body;
  return parse_header(in, path.string(), body);
}

}  // namespace railpad
