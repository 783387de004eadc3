#pragma once

#include "analysis.hpp"
#include "io.hpp"
#include "laplacian.hpp"
#include "mgrit.hpp"
#include "parallel.hpp"
#include "problems.hpp"
#include "propagators.hpp"
#include "rng.hpp"
#include "sequential.hpp"
#include "speedup.hpp"
