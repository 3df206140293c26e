from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.entropy_flux import FluxSettings


class TrainConfig(BaseModel):
    """
    Training configuration. ``None`` fields fall back to the problem defaults.
    """

    model_config = ConfigDict(extra="forbid")

    epochs: int | None = Field(default=None, gt=0)
    batch_size: int | None = Field(default=None, gt=0)
    n_traj: int | None = Field(default=None, gt=0)
    peak_lr: float = Field(default=5e-3, gt=0)
    div_factor: float = Field(default=10.0, gt=1)
    final_div_factor: float = Field(default=1e3, gt=1)
    warmup_fraction: float | None = Field(default=None, gt=0, lt=1)
    b1: float = Field(default=0.9, ge=0, lt=1)
    b2: float = Field(default=0.999, ge=0, lt=1)
    eps: float = Field(default=1e-8, gt=0)
    validation_count: int = Field(default=40, ge=0)
    seed: int = 0
    fcnn_hidden: list[int] | None = None
    icnn_hidden: list[int] | None = None
    c1: float = Field(default=0.1, gt=0, lt=1)
    c_d: float = Field(default=2.0, gt=0)
    c_cfl: float = Field(default=1.0, gt=0)
    wave_speed_gradient: bool = False

    @model_validator(mode="after")
    def check_batch(self):
        if (
            self.batch_size is not None
            and self.n_traj is not None
            and self.batch_size > self.n_traj
        ):
            raise ValueError("batch_size must not exceed n_traj")
        return self

    def flux_settings(self) -> FluxSettings:
        return FluxSettings(
            c1=self.c1,
            c_d=self.c_d,
            c_cfl=self.c_cfl,
            wave_speed_gradient=self.wave_speed_gradient,
        )


class DatasetManifest(BaseModel):
    problem: str
    p: int
    d: int
    n: list[int]
    dx: list[float]
    dt: float
    L: int
    L_train: int
    N_traj: int
    xi: float
    g: float | None
    seed: int
    window_starts: list[int]
    component_abs_means: list[float]


class CheckpointMetadata(BaseModel):
    id: str
    problem: str
    kind: str
    p: int
    d: int
    fcnn_layers: list[int]
    icnn_layers: list[int]
    n: list[int]
    dx: list[float]
    dt: float
    g: float | None = None
    epoch: int
    val_loss: float | None
    xi: float
    seed: int
    c1: float = 0.1
    c_d: float = 2.0
    c_cfl: float = 1.0

    def flux_settings(self) -> FluxSettings:
        return FluxSettings(c1=self.c1, c_d=self.c_d, c_cfl=self.c_cfl)


class ReportMetadata(BaseModel):
    problem: str
    checkpoint_id: str
    xi: float
    tfinal: float
    dt: float
    n: list[int]
    components: list[str]
    snapshot_times: list[float]
