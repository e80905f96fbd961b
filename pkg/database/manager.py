import json

from .models import RunRecord, get_db_session


class DatabaseManager:
    @staticmethod
    def save_run(experiment: str, config: dict, output_prefix: str | None, exit_status: int, summary: str) -> RunRecord:
        with get_db_session() as session:
            record = RunRecord(
                experiment=experiment,
                config_json=json.dumps(config, sort_keys=True),
                output_prefix=output_prefix,
                exit_status=exit_status,
                summary=summary,
            )
            session.add(record)
            session.commit()
            return record

    @staticmethod
    def recent_runs(limit: int = 20) -> list[RunRecord]:
        """Newest first."""
        with get_db_session() as session:
            return (
                session.query(RunRecord)
                .order_by(RunRecord.created_at.desc(), RunRecord.id.desc())
                .limit(limit)
                .all()
            )

    @staticmethod
    def runs_for_experiment(experiment: str, limit: int = 20) -> list[RunRecord]:
        """Newest first, like ``recent_runs``."""
        with get_db_session() as session:
            return (
                session.query(RunRecord)
                .filter(RunRecord.experiment == experiment)
                .order_by(RunRecord.created_at.desc(), RunRecord.id.desc())
                .limit(limit)
                .all()
            )
