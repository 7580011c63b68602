#include "ionpair/clickstream.hpp"

#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace ionpair {

const char* to_string(Wavelength w) { return w == Wavelength::Blue397 ? "397" : "866"; }

void ClickStream::validate() const {
  for (std::size_t k = 0; k < events.size(); ++k) {
    if (events[k].t_ps < 0 || events[k].t_ps > duration_ps)
      throw std::invalid_argument("click timestamp outside [0, duration]");
    if (k > 0 && events[k].t_ps <= events[k - 1].t_ps)
      throw std::invalid_argument("click timestamps must be strictly increasing");
  }
}

bool ClickStream::is_sorted() const {
  for (std::size_t k = 1; k < events.size(); ++k)
    if (events[k].t_ps < events[k - 1].t_ps) return false;
  return true;
}

ClickStream filter(const ClickStream& s, const TagFilter& f) {
  ClickStream out = s;
  out.events.clear();
  for (const PhotonEvent& e : s.events)
    if (f.matches(e)) out.events.push_back(e);
  return out;
}

namespace {

constexpr char kMagic[8] = {'I', 'O', 'N', 'C', 'L', 'K', '1', '\0'};

template <typename T>
void put(std::ostream& out, T v) {
  unsigned char b[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) b[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  unsigned char b[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(b), sizeof(T))) throw FormatError("truncated IONCLK1 stream");
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return static_cast<T>(v);
}

Polarization pol_from_byte(std::uint8_t b) {
  if (b > 2) throw FormatError("invalid polarization tag");
  return static_cast<Polarization>(b);
}

Wavelength wl_from_byte(std::uint8_t b) {
  if (b > 1) throw FormatError("invalid wavelength tag");
  return static_cast<Wavelength>(b);
}

}  // namespace

void write_ionclk(std::ostream& out, const ClickStream& s) {
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, s.channel);
  put<std::uint64_t>(out, s.events.size());
  put<std::uint64_t>(out, static_cast<std::uint64_t>(s.duration_ps));
  for (const PhotonEvent& e : s.events) {
    put<std::uint64_t>(out, static_cast<std::uint64_t>(e.t_ps));
    put<std::uint8_t>(out, static_cast<std::uint8_t>(e.pol));
    put<std::uint8_t>(out, static_cast<std::uint8_t>(e.wl));
  }
}

ClickStream read_ionclk(std::istream& in) {
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw FormatError("not an IONCLK1 stream");
  ClickStream s;
  s.channel = get<std::uint32_t>(in);
  const auto count = get<std::uint64_t>(in);
  s.duration_ps = static_cast<std::int64_t>(get<std::uint64_t>(in));
  s.events.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, 1u << 26)));
  for (std::uint64_t k = 0; k < count; ++k) {
    const auto t = static_cast<std::int64_t>(get<std::uint64_t>(in));
    const auto p = pol_from_byte(get<std::uint8_t>(in));
    const auto w = wl_from_byte(get<std::uint8_t>(in));
    s.events.push_back({t, p, w});
  }
  return s;
}

void write_ionclk_file(const std::string& path, const ClickStream& s) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_ionclk(out, s);
  if (!out) throw std::runtime_error("write failed: " + path);
}

void write_clicks_csv(std::ostream& out, const ClickStream& s) {
  out << "# channel=" << s.channel << " duration_ps=" << s.duration_ps << "\n";
  out << "timestamp_ps,pol,wavelength\n";
  for (const PhotonEvent& e : s.events) out << e.t_ps << ',' << to_string(e.pol) << ',' << to_string(e.wl) << '\n';
}

ClickStream read_clicks_csv(std::istream& in, std::uint32_t channel) {
  ClickStream s;
  s.channel = channel;
  std::optional<std::int64_t> duration;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto pos = line.find("duration_ps=");
      if (pos != std::string::npos) duration = std::stoll(line.substr(pos + 12));
      continue;
    }
    if (!header_seen && line.rfind("timestamp_ps", 0) == 0) {
      header_seen = true;
      continue;
    }
    std::stringstream ss(line);
    std::string t, p, w;
    if (!std::getline(ss, t, ',') || !std::getline(ss, p, ',') || !std::getline(ss, w, ','))
      throw FormatError("malformed click CSV row: " + line);
    PhotonEvent e{};
    try {
      e.t_ps = std::stoll(t);
    } catch (const std::exception&) {
      throw FormatError("bad timestamp in click CSV: " + t);
    }
    if (p == "sigma-") e.pol = Polarization::SigmaMinus;
    else if (p == "pi") e.pol = Polarization::Pi;
    else if (p == "sigma+") e.pol = Polarization::SigmaPlus;
    else throw FormatError("bad polarization tag in click CSV: " + p);
    if (w == "397") e.wl = Wavelength::Blue397;
    else if (w == "866") e.wl = Wavelength::Red866;
    else throw FormatError("bad wavelength tag in click CSV: " + w);
    s.events.push_back(e);
  }
  s.duration_ps = duration ? *duration : (s.events.empty() ? 0 : s.events.back().t_ps);
  return s;
}

ClickStream read_clicks_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  char magic[8] = {};
  in.read(magic, sizeof magic);
  const bool binary = in.gcount() == sizeof magic && std::memcmp(magic, kMagic, sizeof magic) == 0;
  in.clear();
  in.seekg(0);
  return binary ? read_ionclk(in) : read_clicks_csv(in);
}

}  // namespace ionpair
