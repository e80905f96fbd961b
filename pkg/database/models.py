import logging
from datetime import datetime

from sqlalchemy import Column, DateTime, Integer, String, Text, create_engine
from sqlalchemy.orm import declarative_base, sessionmaker

from components.settings import DEFAULT_DB_URL, load_settings

logger = logging.getLogger(__name__)

# Create SQLAlchemy base class
Base = declarative_base()


class RunRecord(Base):
    __tablename__ = 'runs'

    id = Column(Integer, primary_key=True)
    experiment = Column(String, nullable=False)
    config_json = Column(Text, nullable=False)  # effective RunConfig, sorted keys
    output_prefix = Column(String)
    exit_status = Column(Integer, nullable=False)
    summary = Column(Text)
    created_at = Column(DateTime, default=datetime.utcnow)


def _sqlite_engine(url):
    return create_engine(url, connect_args={"check_same_thread": False})


# Database connection and session management
def init_db(db_url=None):
    # Try the configured URL first; if it cannot be reached, fall back to a
    # local SQLite file so recording still works offline.
    if db_url is None:
        db_url = load_settings().db_url

    if db_url and db_url != DEFAULT_DB_URL:
        try:
            # Use pool_pre_ping to help recover stale connections
            engine = create_engine(db_url, pool_pre_ping=True)
            # Try a quick connect to verify availability
            conn = engine.connect()
            conn.close()
            Base.metadata.create_all(engine)
            return sessionmaker(bind=engine, expire_on_commit=False)
        except Exception as exc:
            logger.warning("Could not connect to run ledger at %s: %s. Falling back to %s", db_url, exc, DEFAULT_DB_URL)

    engine = _sqlite_engine(DEFAULT_DB_URL)
    Base.metadata.create_all(engine)
    return sessionmaker(bind=engine, expire_on_commit=False)


# Create session factory
SessionFactory = None


def get_db_session():
    global SessionFactory
    if SessionFactory is None:
        SessionFactory = init_db()
    return SessionFactory()
