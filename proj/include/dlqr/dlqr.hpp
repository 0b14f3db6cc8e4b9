#pragma once

#include "dlqr/error.hpp"
#include "dlqr/matops.hpp"
#include "dlqr/model.hpp"
#include "dlqr/cost.hpp"
#include "dlqr/gradient.hpp"
#include "dlqr/similarity.hpp"
#include "dlqr/stationary.hpp"
#include "dlqr/descent.hpp"
#include "dlqr/landscape.hpp"
#include "dlqr/io.hpp"
