#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "dnr/analysis.hpp"
#include "dnr/data.hpp"
#include "dnr/network.hpp"
#include "dnr/solvers.hpp"
#include "dnr/training.hpp"

namespace dnr {

inline constexpr int kModelFormatVersion = 1;
inline constexpr int kGridFormatVersion = 1;

/// Model file: "DNR1\n", one ASCII header line
///   version=1 input_dim=N output_dim=M width=W depth=D activation=A params=P\n
/// then P little-endian IEEE-754 doubles in Parameters::flatten order.
std::string encode_model(const Network& net);
/// Errors carry ErrorCode::format (with the byte offset) or non_finite.
Network decode_model(std::string_view bytes);
void save_model(const Network& net, const std::filesystem::path& path);
Network load_model(const std::filesystem::path& path);

/// Grid file: "DNG1\n", one ASCII header line
///   version=1 nx=.. ny=.. components=.. snapshots=.. x0=.. x1=.. y0=.. y1=.. dt=..\n
/// then the snapshot times and the values ([snapshot][component][iy][ix]),
/// all little-endian doubles.
std::string encode_grid(const GridField& field);
GridField decode_grid(std::string_view bytes);
void save_grid(const GridField& field, const std::filesystem::path& path);
GridField load_grid(const std::filesystem::path& path);

/// Comma-separated text: '#' metadata lines (provenance, margin, scale,
/// offset), a header row x0..,y0.., then one row per sample, every value
/// in shortest round-trip decimal form.
std::string encode_dataset(const Dataset& d);
Dataset decode_dataset(std::string_view text);
void save_dataset(const Dataset& d, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

inline constexpr std::string_view kMetricsHeader = "epoch,total,main,similarity,residual,ic,bc,mse";
std::string metrics_row(const EpochRecord& r);
std::string encode_metrics(const std::vector<EpochRecord>& history);

/// Rows x,y,loss after a '#' line naming both coordinates.
std::string encode_scan(const SurfaceScan& scan, const NetworkSpec& spec);

/// JSON object with rank, width, singular values, groups and distances.
std::string encode_collapse(const CollapseReport& report);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

/// Shortest decimal that parses back to the same double, with "nan" / "inf" / "-inf" for non-finite values.
std::string format_double(double v);
/// Strict decimal parse of a whole token; throws Error(format).
double parse_double(std::string_view token);
std::uint64_t parse_u64(std::string_view token);

}  // namespace dnr
