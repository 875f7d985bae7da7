#pragma once

#include <string>

#include "json.hpp"
#include "qgs/analysis.hpp"
#include "qgs/detection.hpp"
#include "qgs/source.hpp"
#include "qgs/spectral.hpp"

namespace qgs {

// Shortest round-trip decimal representation; keeps files byte-stable.
std::string format_double(double v);

// header `wavelength_nm,value`, one row per bin
std::string spectrum_to_csv(const Spectrum& s);
void write_spectrum_csv(const std::string& path, const Spectrum& s);
Spectrum read_spectrum_csv(const std::string& path);

nlohmann::json coincidence_to_json(const CoincidenceData& d);
void write_coincidence_json(const std::string& path, const CoincidenceData& d);

// header `lambda_spect_nm,lambda_bucket_nm,density`, row-major over the grid
std::string jsd_to_csv(const JointSpectralDensity& jsd);
void write_jsd_csv(const std::string& path, const JointSpectralDensity& jsd);

// header `separation_nm,noise_fraction,rp,resolvable`
std::string rpmap_to_csv(const RPMap& map);
void write_rpmap_csv(const std::string& path, const RPMap& map);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace qgs
