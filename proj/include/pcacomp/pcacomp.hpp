#ifndef PCACOMP_PCACOMP_HPP
#define PCACOMP_PCACOMP_HPP

#include "accumulate.hpp"
#include "bounds.hpp"
#include "clustering.hpp"
#include "common.hpp"
#include "compression.hpp"
#include "data_matrix.hpp"
#include "io.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "parallel.hpp"
#include "report.hpp"
#include "rng.hpp"
#include "svd.hpp"
#include "symmetric.hpp"

#endif
