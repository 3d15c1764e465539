#pragma once

// Convenience header pulling in the whole library.

#include "acquisition.hpp"
#include "gp.hpp"
#include "nelder_mead.hpp"
#include "normal.hpp"
#include "optimizer.hpp"
#include "pareto.hpp"
#include "problems.hpp"
