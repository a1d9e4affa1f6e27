#pragma once

#include "errors.hpp"
#include "exact_ot.hpp"
#include "fastsum.hpp"
#include "fft.hpp"
#include "io.hpp"
#include "measures.hpp"
#include "memory.hpp"
#include "nfft.hpp"
#include "random.hpp"
#include "sinkhorn_dense.hpp"
#include "sinkhorn_nfft.hpp"
#include "two_point_taylor.hpp"
