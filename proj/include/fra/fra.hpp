#pragma once

#include "fra/tensor.hpp"
#include "fra/rng.hpp"
#include "fra/spectral.hpp"
#include "fra/alignment.hpp"
#include "fra/encoders.hpp"
#include "fra/attack.hpp"
#include "fra/defenses.hpp"
#include "fra/evaluation.hpp"
#include "fra/benchmark.hpp"
#include "fra/gradcheck.hpp"
#include "fra/io.hpp"
#include "fra/config.hpp"
#include "fra/batch.hpp"
#include "fra/selfcheck.hpp"
