#include "cvkit/dataset.hpp"

#include <exception>
#include <fstream>
#include <stdexcept>

#include "cvkit/binary_io.hpp"

namespace cvkit::pipeline {

namespace {

constexpr std::string_view kMagic = "CVDS1";
constexpr std::array<std::array<int, 2>, 6> kCoreOrder{{{0, 0}, {1, 0}, {0, 1}, {2, 0}, {1, 1}, {0, 2}}};

void write_complex(std::ostream& os, cplx z) {
  io::write_le<double>(os, z.real());
  io::write_le<double>(os, z.imag());
}

cplx read_complex(std::istream& is) {
  const double re = io::read_le<double>(is);
  const double im = io::read_le<double>(is);
  return {re, im};
}

void write_record(std::ostream& os, const DatasetRecord& r) {
  io::write_le<std::uint64_t>(os, r.state_id);
  io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(r.n_max));
  io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(r.core.rank));
  for (const auto& [n1, n2] : kCoreOrder) write_complex(os, r.core.coeffs(n1, n2));
  const std::array<std::uint8_t, 8> flags{static_cast<std::uint8_t>(r.circuit.bs_in.has_value()),
                                          static_cast<std::uint8_t>(r.circuit.bs_out.has_value()),
                                          r.labels.e_ppt, r.labels.e_qfi1, r.labels.e_qfi2, 0, 0, 0};
  for (std::uint8_t f : flags) io::write_le<std::uint8_t>(os, f);
  write_complex(os, r.circuit.bs_in.value_or(cplx{}));
  for (const cplx& z : r.circuit.squeeze) write_complex(os, z);
  for (const cplx& z : r.circuit.displace) write_complex(os, z);
  write_complex(os, r.circuit.bs_out.value_or(cplx{}));
  for (double eta : r.circuit.loss) io::write_le<double>(os, eta);
  io::write_le<double>(os, r.witness.ppt_min);
  io::write_le<double>(os, r.witness.qfi1);
  io::write_le<double>(os, r.witness.qfi2);
  for (double v : r.pattern.values()) io::write_le<float>(os, static_cast<float>(v));
}

DatasetRecord read_record(std::istream& is) {
  DatasetRecord r;
  r.state_id = io::read_le<std::uint64_t>(is);
  r.n_max = static_cast<int>(io::read_le<std::uint32_t>(is));
  r.core.rank = static_cast<int>(io::read_le<std::uint32_t>(is));
  if (r.core.rank < 0 || r.core.rank > stellar::kMaxRank)
    throw std::runtime_error("dataset record has invalid core rank");
  for (const auto& [n1, n2] : kCoreOrder) r.core.coeffs(n1, n2) = read_complex(is);
  std::array<std::uint8_t, 8> flags{};
  for (auto& f : flags) f = io::read_le<std::uint8_t>(is);
  for (std::size_t k = 0; k < flags.size(); ++k)
    if (flags[k] > (k < 5 ? 1 : 0)) throw std::runtime_error("dataset record has invalid flag bytes");
  const cplx bs_in = read_complex(is);
  if (flags[0]) r.circuit.bs_in = bs_in;
  for (cplx& z : r.circuit.squeeze) z = read_complex(is);
  for (cplx& z : r.circuit.displace) z = read_complex(is);
  const cplx bs_out = read_complex(is);
  if (flags[1]) r.circuit.bs_out = bs_out;
  for (double& eta : r.circuit.loss) eta = io::read_le<double>(is);
  r.labels = {flags[2], flags[3], flags[4]};
  r.witness.ppt_min = io::read_le<double>(is);
  r.witness.qfi1 = io::read_le<double>(is);
  r.witness.qfi2 = io::read_le<double>(is);
  for (double& v : r.pattern.values()) v = io::read_le<float>(is);
  return r;
}

}  // namespace

std::vector<homodyne::CorrelationPattern> Dataset::patterns() const {
  std::vector<homodyne::CorrelationPattern> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.pattern);
  return out;
}

std::vector<witness::LabelVector> Dataset::labels() const {
  std::vector<witness::LabelVector> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.labels);
  return out;
}

std::array<double, 3> Dataset::class_balance() const {
  std::array<double, 3> frac{};
  if (records.empty()) return frac;
  for (const auto& r : records)
    for (int k = 0; k < 3; ++k) frac[k] += r.labels[k];
  for (double& f : frac) f /= static_cast<double>(records.size());
  return frac;
}

void write_dataset(const Dataset& dataset, std::ostream& os) {
  io::write_magic(os, kMagic);
  io::write_le<std::uint16_t>(os, kDatasetVersion);
  io::write_le<std::uint64_t>(os, dataset.records.size());
  for (const auto& r : dataset.records) write_record(os, r);
  if (!os) throw std::runtime_error("failed to write dataset");
}

Dataset read_dataset(std::istream& is) {
  io::expect_magic(is, kMagic);
  const auto version = io::read_le<std::uint16_t>(is);
  if (version != kDatasetVersion)
    throw std::runtime_error("unsupported dataset version " + std::to_string(version));
  const auto count = io::read_le<std::uint64_t>(is);
  Dataset ds;
  ds.records.reserve(static_cast<std::size_t>(count));
  for (std::uint64_t i = 0; i < count; ++i) ds.records.push_back(read_record(is));
  if (is.peek() != std::char_traits<char>::eof())
    throw std::runtime_error("dataset has trailing bytes beyond the declared record count");
  return ds;
}

void write_dataset(const Dataset& dataset, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  write_dataset(dataset, os);
}

Dataset read_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  return read_dataset(is);
}

DatasetRecord make_record(std::uint64_t state_id, const GenerateConfig& config) {
  const fock::FockCutoff cutoff(config.n_max);
  stellar::GeneratedState gen =
      stellar::synthesize_random_state(config.ranges, cutoff, derive_seed(config.seed, state_id));
  const witness::Labelled labelled = witness::label_state(gen.state);
  DatasetRecord r;
  r.state_id = state_id;
  r.n_max = config.n_max;
  r.core = gen.core;
  r.circuit = gen.circuit;
  r.witness = labelled.values;
  r.labels = labelled.labels;
  r.pattern = homodyne::pattern_from_pdf(gen.state);
  return r;
}

Dataset generate_dataset(const GenerateConfig& config) {
  config.ranges.validate();
  Dataset ds;
  ds.records.resize(config.count);
  std::exception_ptr error;
  const auto n = static_cast<std::int64_t>(config.count);
#pragma omp parallel for schedule(dynamic, 4)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      ds.records[i] = make_record(static_cast<std::uint64_t>(i), config);
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return ds;
}

}  // namespace cvkit::pipeline
