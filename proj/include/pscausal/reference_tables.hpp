#pragma once

namespace pscausal {

/// High-precision K_nu(x) table (columns nu,x,k) compiled in from tests/fixtures.
const char* bessel_k_reference_csv();

}  // namespace pscausal
