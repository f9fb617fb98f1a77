from pydantic import BaseModel


class AccountingReport(BaseModel):
    """Analytic parameter and compute counts for one model config."""

    params: int
    stage_macs: list[int]
    head_macs: int
    macs: int
    flops: int
    query_distance_evals: int
    query_flops: int
    peak_bytes: int
    points: int
    frames: int
