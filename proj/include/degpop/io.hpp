#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "degpop/certify.hpp"
#include "degpop/core.hpp"
#include "degpop/weights.hpp"

namespace degpop::io {

// Every CSV file is LF-terminated, comma separated, with a header row and
// doubles printed with 17 significant digits, so parsing a file returns the
// exact doubles that were written.

/// Writes values laid out over the given axes (row-major t, a, x). An
/// empty t (and a) axis drops that column: `t,a,x,value`, `a,x,value` or
/// `x,value`.
void write_field_csv(std::span<const double> t, std::span<const double> a, std::span<const double> x,
                     std::span<const double> values, const std::filesystem::path& path);

/// Field layout: trajectory `t,a,x,value`, slice `a,x,value`, profile
/// `x,value`; rows in (t, a, x) lexicographic order.
void export_field_csv(const Field& field, const std::filesystem::path& path);

/// Reads a file written by export_field_csv. The rank follows the header;
/// the coordinates must match `grid` node for node (ShapeError otherwise).
Field import_field_csv(const std::filesystem::path& path, const Grid& grid);

/// One row per report: inequality,s,delta,sample_id,seed,lhs,rhs,ratio,
/// log_scale,anomaly,region,grid,note.
void export_reports_csv(const std::vector<CertificateReport>& reports, const std::filesystem::path& path);

/// t,a,x,theta,psi,phi,exp_2s_phi over interior time levels (Theta is
/// singular at t = 0 and t = T); the exponential is clamped as in exp_weight.
void export_weight_table_csv(const WeightSet& ws, const std::filesystem::path& path);

/// Plain numeric table with the given column names.
void export_table_csv(const std::vector<std::string>& header, const std::vector<std::vector<double>>& rows,
                      const std::filesystem::path& path);

/// Shortest decimal form with 17 significant digits.
std::string format_double(double v);

/// Writes `text` to `path` (LF preserved); IoError on failure.
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace degpop::io
