"""Per-epoch training history persisted in SQLite."""
import sqlite3
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional


@dataclass
class EpochRecord:
    """Metrics of one training epoch."""
    epoch: int
    train_loss: float  # Mean summed-head CTC loss per sample
    perplexity: float  # Of the decoding head
    dev_wer: Dict[str, float] = field(default_factory=dict)  # Head -> corpus WER
    wall_time: float = field(default=0.0, compare=False)  # Seconds


class RunStatistics:
    """Stores epoch records of one run directory in ``run.db``."""

    DB_FILE = "run.db"

    def __init__(self, run_dir: Path):
        self.run_dir = Path(run_dir)
        self.db_path = self.run_dir / self.DB_FILE
        self._ensure_db_dir()
        self._init_database()

    def _ensure_db_dir(self) -> None:
        self.run_dir.mkdir(parents=True, exist_ok=True)

    def _init_database(self) -> None:
        """Initialize the SQLite database with required tables."""
        with sqlite3.connect(self.db_path) as conn:
            cursor = conn.cursor()

            cursor.execute('''
                CREATE TABLE IF NOT EXISTS epochs (
                    epoch INTEGER PRIMARY KEY,
                    train_loss REAL NOT NULL,
                    perplexity REAL NOT NULL,
                    wall_time REAL NOT NULL,
                    recorded_at TEXT NOT NULL
                )
            ''')

            # One row per (epoch, head)
            cursor.execute('''
                CREATE TABLE IF NOT EXISTS dev_wer (
                    epoch INTEGER NOT NULL,
                    head TEXT NOT NULL,
                    wer REAL NOT NULL,
                    PRIMARY KEY (epoch, head)
                )
            ''')

            conn.commit()

    def log_epoch(self, record: EpochRecord) -> None:
        """Insert or replace the rows of ``record.epoch``."""
        with sqlite3.connect(self.db_path) as conn:
            cursor = conn.cursor()
            cursor.execute('''
                INSERT OR REPLACE INTO epochs (epoch, train_loss, perplexity, wall_time, recorded_at)
                VALUES (?, ?, ?, ?, ?)
            ''', (record.epoch, record.train_loss, record.perplexity, record.wall_time,
                  datetime.now().isoformat()))
            cursor.execute('DELETE FROM dev_wer WHERE epoch = ?', (record.epoch,))
            cursor.executemany('''
                INSERT INTO dev_wer (epoch, head, wer) VALUES (?, ?, ?)
            ''', [(record.epoch, head, value) for head, value in record.dev_wer.items()])
            conn.commit()

    def get_history(self) -> List[EpochRecord]:
        """All epochs in order."""
        with sqlite3.connect(self.db_path) as conn:
            cursor = conn.cursor()
            cursor.execute('''
                SELECT epoch, train_loss, perplexity, wall_time FROM epochs ORDER BY epoch
            ''')
            rows = cursor.fetchall()
            cursor.execute('SELECT epoch, head, wer FROM dev_wer ORDER BY epoch, head')
            wer_rows = cursor.fetchall()

        wers: Dict[int, Dict[str, float]] = {}
        for epoch, head, value in wer_rows:
            wers.setdefault(epoch, {})[head] = value
        return [
            EpochRecord(epoch=r[0], train_loss=r[1], perplexity=r[2], dev_wer=wers.get(r[0], {}), wall_time=r[3])
            for r in rows
        ]

    def get_best_epoch(self, head: str) -> Optional[int]:
        """Earliest epoch with the lowest dev WER of ``head``, or None."""
        with sqlite3.connect(self.db_path) as conn:
            cursor = conn.cursor()
            cursor.execute('''
                SELECT epoch FROM dev_wer WHERE head = ?
                ORDER BY wer ASC, epoch ASC
                LIMIT 1
            ''', (head,))
            row = cursor.fetchone()
        return row[0] if row else None

    def truncate_after(self, epoch: int) -> int:
        """Drop epochs later than ``epoch``; returns how many were removed."""
        with sqlite3.connect(self.db_path) as conn:
            cursor = conn.cursor()
            cursor.execute('SELECT COUNT(*) FROM epochs WHERE epoch > ?', (epoch,))
            count = cursor.fetchone()[0]
            cursor.execute('DELETE FROM epochs WHERE epoch > ?', (epoch,))
            cursor.execute('DELETE FROM dev_wer WHERE epoch > ?', (epoch,))
            conn.commit()
        return count

    def get_summary(self) -> Dict[str, Any]:
        """Overall figures of the run.

        Returns:
            Dictionary with epoch count, final and lowest perplexity, total
            wall time and the lowest dev WER per head.
        """
        with sqlite3.connect(self.db_path) as conn:
            cursor = conn.cursor()
            cursor.execute('''
                SELECT COUNT(*), MIN(perplexity), COALESCE(SUM(wall_time), 0) FROM epochs
            ''')
            epochs, best_perplexity, total_time = cursor.fetchone()
            cursor.execute('SELECT perplexity FROM epochs ORDER BY epoch DESC LIMIT 1')
            last = cursor.fetchone()
            cursor.execute('SELECT head, MIN(wer) FROM dev_wer GROUP BY head ORDER BY head')
            best_wer = dict(cursor.fetchall())

        return {
            "epochs": epochs,
            "final_perplexity": last[0] if last else None,
            "best_perplexity": best_perplexity,
            "total_wall_time": total_time,
            "best_dev_wer": best_wer,
        }
