"""
DuckDB Results Store

Embedded analytical database collecting sweep cells and training-run
summaries across invocations, so results from many runs can be compared
with SQL or pulled back as Polars DataFrames.

Schema Design:
- sweep_cells: one accuracy per (run_id, variant, protocol, snr_db, seed)
- runs: one row per finished training run
"""

from pathlib import Path
from typing import List, Optional, Union

import duckdb
import polars as pl

from rashvit.src.db.models import (
    RunSummary,
    SweepCell,
    cells_to_polars,
    runs_to_polars,
)


class ResultsStore:
    """
    DuckDB storage for experiment results.

    Example:
        >>> with ResultsStore("runs/results.duckdb") as store:
        ...     store.insert_cells(cells)
        ...     df = store.query_cells(variant="base")
    """

    def __init__(self, db_path: Union[str, Path]):
        """
        Open (or create) the results database.

        Args:
            db_path: Path to database file; ":memory:" for a throwaway store
        """
        self.db_path = Path(db_path) if str(db_path) != ":memory:" else None
        if self.db_path is not None:
            self.db_path.parent.mkdir(parents=True, exist_ok=True)
        self.conn = duckdb.connect(str(self.db_path) if self.db_path else ":memory:")
        self._init_schema()

    def _init_schema(self) -> None:
        """Create tables if they don't exist."""
        # SNR is stored as DOUBLE so the clean sentinel (+inf) round-trips
        self.conn.execute("""
            CREATE TABLE IF NOT EXISTS sweep_cells (
                run_id VARCHAR NOT NULL,
                variant VARCHAR NOT NULL,
                protocol VARCHAR NOT NULL,
                snr_db DOUBLE NOT NULL,
                seed BIGINT NOT NULL,
                accuracy DOUBLE,
                n_test BIGINT,

                PRIMARY KEY (run_id, variant, protocol, snr_db, seed)
            );
        """)

        self.conn.execute("""
            CREATE TABLE IF NOT EXISTS runs (
                run_id VARCHAR PRIMARY KEY,
                out_dir VARCHAR,
                seed BIGINT,
                epochs BIGINT,
                best_epoch BIGINT,
                best_val_acc DOUBLE,
                test_acc DOUBLE,
                num_params BIGINT,
                params_changed BOOLEAN
            );
        """)

    # =========================================================================
    # INSERT OPERATIONS
    # =========================================================================

    def insert_cells(self, cells: List[SweepCell]) -> int:
        """
        Batch insert sweep cells; INSERT OR REPLACE keeps reruns idempotent.

        Returns:
            Number of rows written
        """
        if not cells:
            return 0
        df = cells_to_polars(cells)
        self.conn.execute("INSERT OR REPLACE INTO sweep_cells SELECT * FROM df")
        return len(cells)

    def insert_run(self, run: RunSummary) -> None:
        df = runs_to_polars([run])
        self.conn.execute("INSERT OR REPLACE INTO runs SELECT * FROM df")

    # =========================================================================
    # QUERY OPERATIONS
    # =========================================================================

    def query_cells(
        self,
        run_id: Optional[str] = None,
        variant: Optional[str] = None,
        protocol: Optional[str] = None,
        limit: Optional[int] = None,
    ) -> pl.DataFrame:
        """
        Query sweep cells with optional filters.

        Returns:
            Polars DataFrame ordered by run, variant, SNR and seed
        """
        conditions = []
        params = []

        if run_id:
            conditions.append("run_id = ?")
            params.append(run_id)
        if variant:
            conditions.append("variant = ?")
            params.append(variant)
        if protocol:
            conditions.append("protocol = ?")
            params.append(protocol)

        where_clause = " AND ".join(conditions) if conditions else "1=1"
        limit_clause = f"LIMIT {int(limit)}" if limit else ""

        return self.conn.execute(f"""
            SELECT * FROM sweep_cells
            WHERE {where_clause}
            ORDER BY run_id, variant, snr_db DESC, seed
            {limit_clause}
        """, params).pl()

    def query_runs(self, limit: Optional[int] = None) -> pl.DataFrame:
        limit_clause = f"LIMIT {int(limit)}" if limit else ""
        return self.conn.execute(f"SELECT * FROM runs ORDER BY run_id {limit_clause}").pl()

    def accuracy_by_snr(self, run_id: str) -> pl.DataFrame:
        """Mean accuracy per (variant, snr) for one sweep."""
        return self.conn.execute("""
            SELECT
                variant,
                snr_db,
                AVG(accuracy) AS mean_accuracy,
                COUNT(*) AS n_seeds
            FROM sweep_cells
            WHERE run_id = ?
            GROUP BY variant, snr_db
            ORDER BY variant, snr_db DESC
        """, [run_id]).pl()

    # =========================================================================
    # MAINTENANCE OPERATIONS
    # =========================================================================

    def get_stats(self) -> dict:
        """Row counts and distinct sweeps in the store."""
        cell_count = self.conn.execute("SELECT COUNT(*) FROM sweep_cells").fetchone()[0]
        sweep_count = self.conn.execute("SELECT COUNT(DISTINCT run_id) FROM sweep_cells").fetchone()[0]
        run_count = self.conn.execute("SELECT COUNT(*) FROM runs").fetchone()[0]
        return {
            "cell_count": cell_count,
            "sweep_count": sweep_count,
            "run_count": run_count,
            "db_path": str(self.db_path) if self.db_path else ":memory:",
        }

    def close(self) -> None:
        """Close database connection."""
        if self.conn:
            self.conn.close()
            self.conn = None

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.close()
