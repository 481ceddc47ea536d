"""JSON Schemas (draft 2020-12) for every file the command line reads or writes.

Reports carry ``schema_version``; bump :data:`SCHEMA_VERSION` on any
incompatible change.
"""

SCHEMA_VERSION = 1

_number = {"type": "number"}

MATRIX = {
    "type": "object",
    "required": ["rows", "cols", "data"],
    "properties": {
        "rows": {"type": "integer", "minimum": 0},
        "cols": {"type": "integer", "minimum": 0},
        "data": {
            "type": "array",
            "items": {
                "oneOf": [
                    _number,
                    {"type": "array", "items": _number, "minItems": 2, "maxItems": 2},
                ]
            },
        },
    },
}

_defs = {"matrix": MATRIX}
_ref = {"$ref": "#/$defs/matrix"}


def _schema(title, body):
    out = {"$schema": "https://json-schema.org/draft/2020-12/schema", "title": title, "$defs": _defs}
    out.update(body)
    return out


def _body(required, props):
    return {"type": "object", "required": list(required), "properties": props}


def _report(title, required, props):
    return _schema(title, {
        "type": "object",
        "required": ["schema_version", *required],
        "properties": {"schema_version": {"const": SCHEMA_VERSION}, **props},
    })


SYSTEM = _schema("system", {
    "type": "object", "required": ["A", "B"], "properties": {"A": _ref, "B": _ref},
})
SUPPLY = _schema("supply rate", {
    "type": "object", "required": ["Pi"], "properties": {"Pi": _ref},
})
BAND = _schema("band", {
    "type": "object", "required": ["w1", "w2"], "properties": {"w1": _number, "w2": _number},
})

# a matrix-valued quadratic map: d x d grid of N x N kernels, or one matrix when d = 1
_kernel = {
    "oneOf": [
        _ref,
        {"type": "array", "items": {"type": "array", "items": _ref}},
    ]
}
SPROC_PROBLEM = _schema("s-procedure problem", {
    "type": "object",
    "required": ["F", "constraints"],
    "properties": {
        "F": _kernel,
        "constraints": {"type": "array", "items": _kernel},
        "regular": {"type": "boolean"},
        "field": {"enum": ["real", "complex"]},
    },
})

_FDI = (["holds", "worst_omega", "worst_eig", "worst_vec"], {
    "holds": {"type": "boolean"},
    "worst_omega": _number,
    "worst_eig": _number,
    "worst_vec": {"type": "array", "items": {"type": "array", "items": _number}},
    "marginal": {"type": "boolean"},
    "tol": _number,
    "num_samples": {"type": "integer"},
    "singular_frequencies": {"type": "array", "items": _number},
})
FDI_REPORT = _report("fdi report", *_FDI)

_sdp = {
    "type": "object",
    "required": ["status", "t_star", "iterations"],
    "properties": {
        "status": {"enum": ["StrictlyFeasible", "MarginallyFeasible", "Infeasible", "NumericalFailure"]},
        "t_star": _number,
        "iterations": {"type": "integer"},
        "gap": _number,
        "ball_active": {"type": "boolean"},
        "message": {"type": "string"},
    },
}
LMI_REPORT = _report("lmi report", ["feasible", "solver"], {
    "feasible": {"type": "boolean"},
    "solver": _sdp,
    "certificate": {
        "oneOf": [
            {"type": "null"},
            {
                "type": "object",
                "required": ["P", "Q", "lmi_margin", "q_margin"],
                "properties": {"P": _ref, "Q": _ref, "lmi_margin": _number, "q_margin": _number},
            },
        ]
    },
})

_TDI = (["j_pi", "iqc_matrix", "iqc_max_eig", "constraint_satisfied", "terminal_decay"], {
    "j_pi": _number,
    "iqc_matrix": _ref,
    "iqc_max_eig": _number,
    "constraint_satisfied": {"type": "boolean"},
    "terminal_decay": _number,
    "epsilon": _number,
    "violates_tdi": {"type": "boolean"},
    "details": {"type": "object"},
})
TDI_RESULT = _report("tdi result", *_TDI)
TDI_FALSIFY_REPORT = _report("tdi falsification report", ["falsified", "fdi", "result"], {
    "falsified": {"type": "boolean"},
    "reason": {"type": "string"},
    "fdi": _body(*_FDI),
    "result": {"oneOf": [{"type": "null"}, _body(*_TDI)]},
})

SPROC_REPORT = _report("s-procedure report", ["certificate", "witness"], {
    "regular": {"type": "boolean"},
    "certificate": {
        "oneOf": [
            {"type": "null"},
            {
                "type": "object",
                "required": ["tau0", "taus"],
                "properties": {"tau0": _number, "taus": {"type": "array", "items": _ref},
                               "margin": _number},
            },
        ]
    },
    "witness": {
        "oneOf": [
            {"type": "null"},
            {
                "type": "object",
                "required": ["z", "objective"],
                "properties": {
                    "z": {"type": "array", "items": {"type": "array", "items": _number}},
                    "objective": _number,
                    "constraint_min_eigs": {"type": "array", "items": _number},
                    "evaluations": {"type": "integer"},
                    "restart": {"type": "integer"},
                },
            },
        ]
    },
})

SCORECARD = _report("equivalence scorecard", ["counts", "anomalies", "config"], {
    "counts": {
        "type": "object",
        "required": ["agree_holds", "agree_fails", "marginal_skipped", "anomalies"],
        "additionalProperties": {"type": "integer"},
    },
    "anomalies": {"type": "array", "items": {"type": "object", "required": ["index"]}},
    "config": {"type": "object"},
    "records": {"type": "array", "items": {"type": "object"}},
})

ERROR = _report("error", ["error", "message", "exit_code"], {
    "error": {"type": "string"},
    "message": {"type": "string"},
    "exit_code": {"enum": [1, 2, 3]},
})

SCHEMAS = {
    "system": SYSTEM,
    "supply": SUPPLY,
    "band": BAND,
    "sproc_problem": SPROC_PROBLEM,
    "fdi_report": FDI_REPORT,
    "lmi_report": LMI_REPORT,
    "tdi_result": TDI_RESULT,
    "tdi_falsify_report": TDI_FALSIFY_REPORT,
    "sproc_report": SPROC_REPORT,
    "scorecard": SCORECARD,
    "error": ERROR,
}
