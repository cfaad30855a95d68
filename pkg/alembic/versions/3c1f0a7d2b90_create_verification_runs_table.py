"""Create verification runs table

Revision ID: 3c1f0a7d2b90
Revises:
Create Date: 2026-10-18 00:00:00.000000

"""
from alembic import op
import sqlalchemy as sa

# revision identifiers, used by Alembic.
revision = '3c1f0a7d2b90'
down_revision = None
branch_labels = None
depends_on = None

def upgrade() -> None:
    op.create_table('verification_runs',
        sa.Column('id', sa.Integer(), nullable=False),
        sa.Column('run_id', sa.String(length=64), nullable=False),
        sa.Column('suites', sa.JSON(), nullable=False),
        sa.Column('status', sa.String(length=20), nullable=False),
        sa.Column('passed', sa.Integer(), nullable=True),
        sa.Column('failed', sa.Integer(), nullable=True),
        sa.Column('config', sa.JSON(), nullable=True),
        sa.Column('report', sa.JSON(), nullable=True),
        sa.Column('created_at', sa.DateTime(timezone=True), server_default=sa.func.now(), nullable=True),
        sa.PrimaryKeyConstraint('id')
    )
    op.create_index(op.f('ix_verification_runs_id'), 'verification_runs', ['id'], unique=False)
    op.create_index(op.f('ix_verification_runs_run_id'), 'verification_runs', ['run_id'], unique=True)

def downgrade() -> None:
    op.drop_index(op.f('ix_verification_runs_run_id'), table_name='verification_runs')
    op.drop_index(op.f('ix_verification_runs_id'), table_name='verification_runs')
    op.drop_table('verification_runs')
