# Generated by Django 5.1.7 on 2026-10-18 09:12

import uuid
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='RunRecord',
            fields=[
                ('id', models.UUIDField(default=uuid.uuid4, editable=False, primary_key=True, serialize=False)),
                ('task', models.CharField(max_length=20)),
                ('figure', models.CharField(blank=True, max_length=10, null=True)),
                ('seed', models.PositiveIntegerField(default=0)),
                ('status', models.CharField(choices=[('COMPLETED', 'Completed'), ('FAILED', 'Failed')], max_length=10)),
                ('output_dir', models.CharField(blank=True, max_length=500)),
                ('config', models.JSONField()),
                ('manifest', models.JSONField(blank=True, null=True)),
                ('error', models.TextField(blank=True)),
                ('duration_s', models.FloatField(default=0.0)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'db_table': 'run_records',
                'ordering': ['-created_at'],
            },
        ),
    ]
