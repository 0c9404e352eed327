# Generated by Django 5.2.4 on 2026-10-18 10:12

from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='SweepRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('config_hash', models.CharField(db_index=True, max_length=64)),
                ('seed', models.BigIntegerField(blank=True, null=True)),
                ('code_version', models.CharField(max_length=20)),
                ('parameter', models.CharField(blank=True, max_length=50)),
                ('gridpoints', models.IntegerField(default=0)),
                ('failures', models.IntegerField(default=0)),
                ('status', models.CharField(choices=[('complete', 'Complete'), ('partial', 'Partial')], default='complete', max_length=20)),
                ('report', models.JSONField(default=dict)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'verbose_name': 'Sweep Run',
                'verbose_name_plural': 'Sweep Runs',
                'ordering': ['-created_at'],
                'indexes': [models.Index(fields=['config_hash', 'seed'], name='chsh_scan_sweep_hash_seed_idx')],
            },
        ),
    ]
