#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tlw/coupling.hpp"
#include "tlw/stationary.hpp"

namespace tlw {

enum class Verdict { spectrally_stable, spectrally_unstable };

std::string to_string(Verdict v);

struct Counts {
    int N_neg = 0;      // mu < 0 with (K X | X) <= 0
    int N_zero = 0;     // mu = 0 with (K X | X) <= 0
    int N_pos = 0;      // mu > 0 with (K X | X) <= 0
    int N_complex = 0;  // mu with Im mu > 0, counted with multiplicity
    int sum() const { return N_neg + N_zero + N_pos + N_complex; }
};

// A solved sub-problem. `consistent` is false when the value contradicts its expectation.
struct Evidence {
    std::string name;
    double value = 0.0;
    std::string expectation;
    bool consistent = true;
};

struct StabilityVerdict {
    std::string model;  // hartree | coupled
    BranchLabel branch = BranchLabel::symmetric_plus;
    double kappa = 0.0;
    int tau = 0;
    double c = 0.0;
    Counts counts;
    int morse_index = 0;
    std::optional<double> gamma_c;
    Verdict verdict = Verdict::spectrally_stable;
    std::vector<Evidence> evidence;
    // Disagreements between the counts and the numeric spectrum; empty when all agree.
    std::vector<std::string> diagnostics;
    // Numeric scan of the generator: eigenvalues with Re > 1e-6 off / on the real axis.
    int complex_scan = 0;
    int real_scan = 0;
    double max_real_part = 0.0;
};

StabilityVerdict count_hartree(double kappa, BranchLabel label);

// Root of F(gamma) = gamma - (2/c^2)(kappa_gamma - 2); present only for tau = +1, kappa > 2.
std::optional<double> solve_gamma_c(double kappa, int tau, double c, const KappaFamily& family);
double gamma_c_function(double gamma, double c, const KappaFamily& family);

struct CoupledCountOptions {
    int scan_modes = 256;   // modes of the discretized operator used for the scan
    bool scan = true;
};

// The base shape is recalibrated to kappa on the scan grid.
StabilityVerdict count_coupled(BranchLabel label, double kappa, double c, const CouplingShape& base_shape,
                               const CoupledCountOptions& opt = {});

}  // namespace tlw
