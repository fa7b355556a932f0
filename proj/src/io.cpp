#include "scarlab/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "scarlab/digest.hpp"
#include "scarlab/errors.hpp"

namespace scarlab {

namespace fs = std::filesystem;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_file_atomic(const fs::path& path, std::string_view contents) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::uint64_t file_digest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  Fnv1a h;
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    h.bytes(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  if (in.bad()) throw IoError("failed reading " + path.string());
  return h.get();
}

std::string basis_csv(const BasisMap& basis) {
  std::string out = "index,bitstring,pattern\n";
  for (std::size_t k = 0; k < basis.size(); ++k) {
    const auto cfg = basis.configuration(k);
    out += std::to_string(k);
    out += ',';
    out += cfg.bitstring();
    out += ',';
    out += cfg.pattern();
    out += '\n';
  }
  return out;
}

namespace {

std::string two_columns(std::string_view header, const std::vector<double>& a,
                        const std::vector<double>& b) {
  if (a.size() != b.size()) throw SizeError("CSV columns differ in length");
  std::string out(header);
  out += '\n';
  for (std::size_t k = 0; k < a.size(); ++k) {
    out += format_double(a[k]);
    out += ',';
    out += format_double(b[k]);
    out += '\n';
  }
  return out;
}

}  // namespace

std::string time_series_csv(const TimeSeries& series) {
  return two_columns("time,value", series.times, series.values);
}

std::string overlap_csv(const OverlapSpectrum& spectrum) {
  return two_columns("energy,overlap", spectrum.energies, spectrum.overlaps);
}

std::string entropy_csv(const EntropyScatter& scatter) {
  std::vector<double> e, s;
  for (const auto& p : scatter.points) {
    e.push_back(p.energy);
    s.push_back(p.entropy);
  }
  return two_columns("energy,entropy", e, s);
}

std::string sweep_summary_csv(const DisorderSweepResult& result) {
  std::string out = "W,mean_peak,std_error\n";
  for (std::size_t i = 0; i < result.strengths.size(); ++i)
    out += format_double(result.strengths[i]) + ',' + format_double(result.mean_peaks[i]) + ',' +
           format_double(result.std_errors[i]) + '\n';
  return out;
}

std::string sweep_cells_csv(const DisorderSweepResult& result) {
  std::string out = "W,realization,seed,peak_time,peak_value\n";
  for (const auto& c : result.cells)
    out += format_double(c.strength) + ',' + std::to_string(c.realization) + ',' +
           std::to_string(c.seed) + ',' + format_double(c.peak.time) + ',' +
           format_double(c.peak.value) + '\n';
  return out;
}

std::string operator_coo(const OperatorMatrix& op) {
  std::string out = "row col re im\n";
  const auto offsets = op.row_offsets();
  const auto cols = op.cols();
  const auto vals = op.values();
  for (std::size_t r = 0; r < op.dim(); ++r)
    for (std::size_t k = offsets[r]; k < offsets[r + 1]; ++k)
      out += std::to_string(r) + ' ' + std::to_string(cols[k]) + ' ' + format_double(vals[k].real()) +
             ' ' + format_double(vals[k].imag()) + '\n';
  return out;
}

nlohmann::json to_json(const DisorderRealization& fields) {
  nlohmann::json sites = nlohmann::json::array();
  for (const auto& f : fields.fields) sites.push_back({f.x, f.y, f.z});
  return {{"seed", fields.seed}, {"W", fields.strength}, {"N", fields.n_sites}, {"fields", sites}};
}

DisorderRealization disorder_from_json(const nlohmann::json& j) {
  DisorderRealization out;
  out.seed = j.at("seed").get<std::uint64_t>();
  out.strength = j.at("W").get<double>();
  out.n_sites = j.at("N").get<int>();
  for (const auto& t : j.at("fields")) out.fields.push_back({t.at(0).get<double>(), t.at(1).get<double>(), t.at(2).get<double>()});
  if (out.fields.size() != static_cast<std::size_t>(out.n_sites))
    throw SizeError("disorder JSON lists " + std::to_string(out.fields.size()) + " field triples for N=" +
                    std::to_string(out.n_sites));
  return out;
}

nlohmann::json to_json(const GaussianFit& fit) {
  return {{"model", "a*exp(-b*W^2)+c"}, {"a", fit.a}, {"b", fit.b}, {"c", fit.c},
          {"residual_norm", fit.residual_norm}, {"converged", fit.converged},
          {"degenerate", fit.degenerate}, {"iterations", fit.iterations}};
}

}  // namespace scarlab
