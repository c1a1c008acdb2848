#pragma once

#include "safepd/core.hpp"
#include "safepd/problem.hpp"
#include "safepd/oracle.hpp"
#include "safepd/smoothing.hpp"
#include "safepd/inner.hpp"
#include "safepd/kkt.hpp"
#include "safepd/trace.hpp"
#include "safepd/scsa.hpp"
#include "safepd/safepd.hpp"
#include "safepd/baseline.hpp"
#include "safepd/verify.hpp"
#include "safepd/io.hpp"
#include "safepd/runner.hpp"
