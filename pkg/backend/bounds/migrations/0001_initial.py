from django.db import migrations, models
import uuid


class Migration(migrations.Migration):
    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='ExperimentRun',
            fields=[
                ('id', models.UUIDField(default=uuid.uuid4, editable=False, primary_key=True, serialize=False)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('config_hash', models.CharField(max_length=64)),
                ('model_hash', models.CharField(max_length=64)),
                ('widths', models.JSONField(default=list)),
                ('mode', models.CharField(choices=[('interval', 'Interval'), ('candidates', 'Candidates')],
                                          default='interval', max_length=20)),
                ('output_dir', models.CharField(max_length=500)),
                ('status', models.CharField(choices=[('running', 'Running'), ('completed', 'Completed'),
                                                     ('not-converged', 'Not converged'), ('failed', 'Failed')],
                                            default='running', max_length=20)),
                ('summary', models.JSONField(blank=True, default=dict)),
            ],
            options={
                'ordering': ['-created_at'],
                'indexes': [
                    models.Index(fields=['model_hash'], name='bounds_expe_model_h_3f1c2a_idx'),
                    models.Index(fields=['created_at'], name='bounds_expe_created_8d0b7e_idx'),
                ],
            },
        ),
    ]
